//! Masked distillation objective and its gradients.
//!
//! For a batch of `N` samples with student tokens `K_n`, teacher tokens `Q_n`
//! (both `T x D`) and activation masks `M_n`, let `K* = K ⊙ M` and
//! `Q* = Q ⊙ M` with the mask broadcast over the feature axis. Then
//!
//! ```text
//! l1    = 1/N Σ_n ‖K*_n − Q*_n‖₁
//! intra = 1/N Σ_n ‖K*_n K*_nᵀ − Q*_n Q*_nᵀ‖₁
//! cross = 1/N Σ_n ‖K*_n Q*_nᵀ − Q*_n Q*_nᵀ‖₁
//! total = l1 + λ_is · intra + λ_cs · cross
//! ```
//!
//! `‖·‖₁` is the entrywise absolute sum. Gradients use `sign(0) = 0` and are
//! taken with respect to the unmasked `K`, so they vanish on masked-out tokens.

mod gradcheck;

pub use gradcheck::{gradcheck, gradcheck_batch, GradcheckReport, LossKind, KINK_EPS};

use crate::error::{Error, Result};
use crate::events::ActivationMask;
use crate::features::FeatureGrid;
use crate::par::{self, Execution};

pub const DEFAULT_LAMBDA_IS: f64 = 10.0;
pub const DEFAULT_LAMBDA_CS: f64 = 4.0;

/// Student/teacher grids with their shared activation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPair {
    k: FeatureGrid,
    q: FeatureGrid,
    mask: ActivationMask,
    k_star: FeatureGrid,
    q_star: FeatureGrid,
}

fn apply_mask(g: &FeatureGrid, mask: &ActivationMask) -> FeatureGrid {
    let mut out = g.clone();
    for (t, &on) in mask.bits().iter().enumerate() {
        if !on {
            out.token_mut(t).fill(0.0);
        }
    }
    out
}

impl MaskedPair {
    pub fn new(k: FeatureGrid, q: FeatureGrid, mask: ActivationMask) -> Result<Self> {
        if !k.same_shape(&q) {
            return Err(Error::Dimension(format!(
                "student {}x{}x{} vs teacher {}x{}x{}",
                k.rows(),
                k.cols(),
                k.dim(),
                q.rows(),
                q.cols(),
                q.dim()
            )));
        }
        if (mask.rows(), mask.cols()) != (k.rows(), k.cols()) {
            return Err(Error::Dimension(format!(
                "mask {}x{} vs token grid {}x{}",
                mask.rows(),
                mask.cols(),
                k.rows(),
                k.cols()
            )));
        }
        let k_star = apply_mask(&k, &mask);
        let q_star = apply_mask(&q, &mask);
        Ok(MaskedPair {
            k,
            q,
            mask,
            k_star,
            q_star,
        })
    }

    pub fn k(&self) -> &FeatureGrid {
        &self.k
    }

    pub fn q(&self) -> &FeatureGrid {
        &self.q
    }

    pub fn mask(&self) -> &ActivationMask {
        &self.mask
    }

    pub fn k_star(&self) -> &FeatureGrid {
        &self.k_star
    }

    pub fn q_star(&self) -> &FeatureGrid {
        &self.q_star
    }

    fn active(&self) -> Vec<usize> {
        self.mask
            .bits()
            .iter()
            .enumerate()
            .filter_map(|(t, &on)| on.then_some(t))
            .collect()
    }

    fn zeros_like(&self) -> FeatureGrid {
        FeatureGrid::zeros(self.k.rows(), self.k.cols(), self.k.dim())
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One loss term over a batch: the batch-mean value and per-sample
/// gradients with respect to `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grads: Vec<FeatureGrid>,
}

/// Per-sample (unnormalised value, unnormalised gradient).
fn l1_sample(p: &MaskedPair) -> (f64, FeatureGrid) {
    let mut grad = p.zeros_like();
    let mut value = 0.0;
    for t in p.active() {
        let (k, q) = (p.k_star.token(t), p.q_star.token(t));
        let g = grad.token_mut(t);
        for d in 0..k.len() {
            let r = k[d] - q[d];
            value += r.abs();
            g[d] = sign(r);
        }
    }
    (value, grad)
}

/// Shared Gram-discrepancy kernel: `Σ_ij |L_i·R_j − Q_i·Q_j|` over active
/// tokens, with gradient `scale · Σ_j sign(·)_ij · G_j` for each active `i`.
fn gram_sample(p: &MaskedPair, left: &FeatureGrid, right: &FeatureGrid, back: &FeatureGrid, scale: f64) -> (f64, FeatureGrid) {
    let active = p.active();
    let q = &p.q_star;
    let mut grad = p.zeros_like();
    let mut value = 0.0;
    for &i in &active {
        let (li, qi) = (left.token(i), q.token(i));
        let mut gi = vec![0.0; li.len()];
        for &j in &active {
            let a = dot(li, right.token(j)) - dot(qi, q.token(j));
            value += a.abs();
            let s = sign(a);
            if s != 0.0 {
                gi.iter_mut().zip(back.token(j)).for_each(|(g, v)| *g += s * v);
            }
        }
        grad.token_mut(i)
            .iter_mut()
            .zip(&gi)
            .for_each(|(g, v)| *g = scale * v);
    }
    (value, grad)
}

fn intra_sample(p: &MaskedPair) -> (f64, FeatureGrid) {
    // d/dK Σ|K Kᵀ − Q Qᵀ| = (S + Sᵀ) K = 2 S K with S = sign(A) symmetric
    gram_sample(p, &p.k_star, &p.k_star, &p.k_star, 2.0)
}

fn cross_sample(p: &MaskedPair) -> (f64, FeatureGrid) {
    gram_sample(p, &p.k_star, &p.q_star, &p.q_star, 1.0)
}

fn batch_term(
    batch: &[MaskedPair],
    exec: Execution,
    f: fn(&MaskedPair) -> (f64, FeatureGrid),
) -> Result<LossTerm> {
    check_batch(batch)?;
    let n = batch.len() as f64;
    let per = par::map(exec, batch, f);
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(per.len());
    for (v, mut g) in per {
        value += v;
        g.data_mut().iter_mut().for_each(|x| *x /= n);
        grads.push(g);
    }
    Ok(LossTerm {
        value: value / n,
        grads,
    })
}

fn check_batch(batch: &[MaskedPair]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Parameter("loss batch is empty".into()));
    }
    Ok(())
}

pub fn masked_l1(batch: &[MaskedPair]) -> Result<LossTerm> {
    batch_term(batch, Execution::default(), l1_sample)
}

pub fn intra_structure(batch: &[MaskedPair]) -> Result<LossTerm> {
    batch_term(batch, Execution::default(), intra_sample)
}

pub fn cross_structure(batch: &[MaskedPair]) -> Result<LossTerm> {
    batch_term(batch, Execution::default(), cross_sample)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_is: f64,
    pub lambda_cs: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_is: DEFAULT_LAMBDA_IS,
            lambda_cs: DEFAULT_LAMBDA_CS,
        }
    }
}

impl LossWeights {
    pub fn l1_only() -> Self {
        LossWeights {
            lambda_is: 0.0,
            lambda_cs: 0.0,
        }
    }

    pub fn total(&self, l1: f64, intra: f64, cross: f64) -> f64 {
        l1 + self.lambda_is * intra + self.lambda_cs * cross
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l1: f64,
    pub intra: f64,
    pub cross: f64,
    pub total: f64,
    pub weights: LossWeights,
    /// Diagnostic only: `l1` divided by the token-feature count.
    pub l1_per_element: f64,
    /// Per-sample gradient of `total` with respect to `K`.
    pub grads: Vec<FeatureGrid>,
}

pub fn combined_loss(batch: &[MaskedPair], weights: LossWeights) -> Result<LossReport> {
    combined_loss_with(batch, weights, Execution::default())
}

/// Weighted objective; per-sample work may run in parallel, reductions are
/// done in batch order.
pub fn combined_loss_with(
    batch: &[MaskedPair],
    weights: LossWeights,
    exec: Execution,
) -> Result<LossReport> {
    check_batch(batch)?;
    let n = batch.len() as f64;
    let per = par::map(exec, batch, |p| {
        let (l1, g1) = l1_sample(p);
        let (is, gis) = intra_sample(p);
        let (cs, gcs) = cross_sample(p);
        let mut g = g1;
        for ((x, a), b) in g.data_mut().iter_mut().zip(gis.data()).zip(gcs.data()) {
            *x = (*x + weights.lambda_is * a + weights.lambda_cs * b) / n;
        }
        (l1, is, cs, g)
    });
    let (mut l1, mut intra, mut cross) = (0.0, 0.0, 0.0);
    let mut grads = Vec::with_capacity(per.len());
    for (a, b, c, g) in per {
        l1 += a;
        intra += b;
        cross += c;
        grads.push(g);
    }
    let (l1, intra, cross) = (l1 / n, intra / n, cross / n);
    let elems = (batch[0].k.tokens() * batch[0].k.dim()).max(1) as f64;
    Ok(LossReport {
        l1,
        intra,
        cross,
        total: weights.total(l1, intra, cross),
        weights,
        l1_per_element: l1 / elems,
        grads,
    })
}
