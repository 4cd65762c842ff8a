//! Central-difference verification of the analytic gradients.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{combined_loss, cross_structure, intra_structure, masked_l1, LossWeights, MaskedPair};
use crate::error::{Error, Result};
use crate::events::{ActivationMask, EventVolume};
use crate::features::{student_backward, student_forward, FeatureGrid, StudentParams};

/// Arguments of an absolute value closer than this to zero count as kinks.
pub const KINK_EPS: f64 = 1e-8;

/// Floor of the relative-error denominator. Entries whose gradient is much
/// smaller than one are compared absolutely, since central differences of
/// an O(1) loss carry roughly `ε_mach · |L| / h` of rounding noise.
const REL_FLOOR: f64 = 1.0;

const SAMPLES_PER_BATCH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L1,
    Intra,
    Cross,
    Combined,
    /// Parameter gradients of the patch-MLP encoder.
    Student,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::L1,
        LossKind::Intra,
        LossKind::Cross,
        LossKind::Combined,
        LossKind::Student,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::L1 => "l1",
            LossKind::Intra => "intra",
            LossKind::Cross => "cross",
            LossKind::Combined => "combined",
            LossKind::Student => "student",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub kind: LossKind,
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1)` over
    /// compared entries.
    pub max_rel_err: f64,
    /// Entries skipped because a loss argument sits at a kink.
    pub kink_count: usize,
    /// Entries compared.
    pub checked: usize,
}

impl GradcheckReport {
    fn empty(kind: LossKind) -> Self {
        GradcheckReport {
            kind,
            max_rel_err: 0.0,
            kink_count: 0,
            checked: 0,
        }
    }

    fn merge(&mut self, other: &GradcheckReport) {
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.kink_count += other.kink_count;
        self.checked += other.checked;
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.max_rel_err = self.max_rel_err.max((analytic - numeric).abs() / denom);
        self.checked += 1;
    }
}

fn loss_value(kind: LossKind, batch: &[MaskedPair], w: LossWeights) -> Result<f64> {
    Ok(match kind {
        LossKind::L1 => masked_l1(batch)?.value,
        LossKind::Intra => intra_structure(batch)?.value,
        LossKind::Cross => cross_structure(batch)?.value,
        LossKind::Combined => combined_loss(batch, w)?.total,
        LossKind::Student => return Err(Error::Parameter("student has no feature loss".into())),
    })
}

fn loss_grads(kind: LossKind, batch: &[MaskedPair], w: LossWeights) -> Result<Vec<FeatureGrid>> {
    Ok(match kind {
        LossKind::L1 => masked_l1(batch)?.grads,
        LossKind::Intra => intra_structure(batch)?.grads,
        LossKind::Cross => cross_structure(batch)?.grads,
        LossKind::Combined => combined_loss(batch, w)?.grads,
        LossKind::Student => return Err(Error::Parameter("student has no feature loss".into())),
    })
}

/// Whether entry `(t, d)` of `pair.k` sits within reach of a kink of `kind`
/// for a perturbation of size `h`.
fn near_kink(kind: LossKind, pair: &MaskedPair, t: usize, d: usize, h: f64) -> bool {
    let active = pair.active();
    let (ks, qs) = (pair.k_star(), pair.q_star());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let max_abs = |g: &FeatureGrid| g.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let l1 = || (ks.token(t)[d] - qs.token(t)[d]).abs() < KINK_EPS.max(h);
    let intra = || {
        let margin = KINK_EPS.max(2.0 * h * (max_abs(ks) + h));
        active.iter().any(|&j| {
            (dot(ks.token(t), ks.token(j)) - dot(qs.token(t), qs.token(j))).abs() < margin
        })
    };
    let cross = || {
        let margin = KINK_EPS.max(h * max_abs(qs));
        active.iter().any(|&j| {
            (dot(ks.token(t), qs.token(j)) - dot(qs.token(t), qs.token(j))).abs() < margin
        })
    };
    match kind {
        LossKind::L1 => l1(),
        LossKind::Intra => intra(),
        LossKind::Cross => cross(),
        LossKind::Combined => l1() || intra() || cross(),
        LossKind::Student => false,
    }
}

fn with_k(pair: &MaskedPair, t: usize, d: usize, value: f64) -> Result<MaskedPair> {
    let mut k = pair.k().clone();
    k.token_mut(t)[d] = value;
    MaskedPair::new(k, pair.q().clone(), pair.mask().clone())
}

/// Compares analytic and central-difference gradients of a feature loss on
/// one batch, entry by entry over every student feature.
pub fn gradcheck_batch(
    kind: LossKind,
    batch: &[MaskedPair],
    weights: LossWeights,
    h: f64,
) -> Result<GradcheckReport> {
    if !(h > 0.0) {
        return Err(Error::Parameter("step h must be positive".into()));
    }
    let grads = loss_grads(kind, batch, weights)?;
    let mut report = GradcheckReport::empty(kind);
    let mut perturbed = batch.to_vec();
    for n in 0..batch.len() {
        let pair = &batch[n];
        for t in 0..pair.k().tokens() {
            let on = pair.mask().bits()[t];
            for d in 0..pair.k().dim() {
                if on && near_kink(kind, pair, t, d, h) {
                    report.kink_count += 1;
                    continue;
                }
                let x = pair.k().token(t)[d];
                perturbed[n] = with_k(pair, t, d, x + h)?;
                let plus = loss_value(kind, &perturbed, weights)?;
                perturbed[n] = with_k(pair, t, d, x - h)?;
                let minus = loss_value(kind, &perturbed, weights)?;
                perturbed[n] = pair.clone();
                report.record(grads[n].token(t)[d], (plus - minus) / (2.0 * h));
            }
        }
    }
    Ok(report)
}

fn random_batch(rng: &mut ChaCha8Rng, tokens: usize, dim: usize) -> Result<Vec<MaskedPair>> {
    (0..SAMPLES_PER_BATCH)
        .map(|_| {
            let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
            let k = FeatureGrid::from_data(1, tokens, dim, uniform(tokens * dim))?;
            let q = FeatureGrid::from_data(1, tokens, dim, uniform(tokens * dim))?;
            let mut bits: Vec<bool> = (0..tokens).map(|_| rng.random_bool(0.75)).collect();
            bits[0] = true;
            let mask = ActivationMask::from_bits(1, tokens, 0.0, bits)?;
            MaskedPair::new(k, q, mask)
        })
        .collect()
}

fn student_check(rng: &mut ChaCha8Rng, tokens: usize, dim: usize, hidden: usize, h: f64) -> Result<GradcheckReport> {
    let (patch, bins) = (2, 2);
    let mut params = StudentParams::init(patch, bins, hidden, dim, rng.random())?;
    // non-zero biases so every path is exercised
    for l in params.layers.iter_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let (w, hgt) = (tokens * patch, patch);
    let vol_data = (0..w * hgt * bins).map(|_| rng.random_range(-2.0..2.0)).collect();
    let volume = EventVolume::from_data(w, hgt, bins, vol_data)?;
    let up_data = (0..tokens * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream = FeatureGrid::from_data(1, tokens, dim, up_data)?;

    let objective = |p: &StudentParams| -> Result<f64> {
        let f = student_forward(p, &volume)?;
        Ok(f.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum())
    };
    let grads = student_backward(&params, &volume, &upstream)?;
    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.iter().copied()).collect();

    let mut report = GradcheckReport::empty(LossKind::Student);
    for (idx, &a) in analytic.iter().enumerate() {
        let (tensor, offset) = locate(&params, idx);
        let x = params.tensors_mut()[tensor][offset];
        params.tensors_mut()[tensor][offset] = x + h;
        let plus = objective(&params)?;
        params.tensors_mut()[tensor][offset] = x - h;
        let minus = objective(&params)?;
        params.tensors_mut()[tensor][offset] = x;
        report.record(a, (plus - minus) / (2.0 * h));
    }
    Ok(report)
}

/// Maps a flat parameter index to (tensor, offset) in `tensors_mut` order.
fn locate(params: &StudentParams, mut idx: usize) -> (usize, usize) {
    for (i, (_, t)) in params.named_tensors().iter().enumerate() {
        if idx < t.len() {
            return (i, idx);
        }
        idx -= t.len();
    }
    unreachable!("index past the last parameter")
}

/// Seeded random-instance suite for one loss: `seeds` batches of two
/// samples with `tokens x dim` features and random masks. The student
/// check covers both the linear and the tanh-MLP encoder per seed.
pub fn gradcheck(kind: LossKind, tokens: usize, dim: usize, seeds: u64, h: f64) -> Result<GradcheckReport> {
    if tokens == 0 || dim == 0 {
        return Err(Error::Parameter("tokens and dim must be positive".into()));
    }
    let mut report = GradcheckReport::empty(kind);
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = if kind == LossKind::Student {
            let mut r = student_check(&mut rng, tokens, dim, 0, h)?;
            r.merge(&student_check(&mut rng, tokens, dim, 4, h)?);
            r
        } else {
            let batch = random_batch(&mut rng, tokens, dim)?;
            gradcheck_batch(kind, &batch, LossWeights::default(), h)?
        };
        report.merge(&r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_matches_to_high_precision() {
        // small instance so rounding noise ε·|L|/h stays below 1e-9
        let r = gradcheck(LossKind::L1, 4, 2, 5, 1e-6).unwrap();
        assert!(r.max_rel_err < 1e-9, "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn identical_features_are_all_kinks() {
        let k = FeatureGrid::from_data(1, 3, 2, vec![0.5, -1.0, 2.0, 0.1, 0.3, 0.7]).unwrap();
        let pair = MaskedPair::new(k.clone(), k, ActivationMask::full(1, 3)).unwrap();
        for kind in [LossKind::L1, LossKind::Intra, LossKind::Combined] {
            let r = gradcheck_batch(kind, std::slice::from_ref(&pair), LossWeights::default(), 1e-6).unwrap();
            assert_eq!(r.kink_count, 6, "{kind}");
            assert_eq!(r.checked, 0, "{kind}");
        }
    }

    #[test]
    fn every_kind_passes_random_suite() {
        for kind in LossKind::ALL {
            let r = gradcheck(kind, 8, 4, 2, 1e-6).unwrap();
            assert!(r.max_rel_err < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("cross".parse::<LossKind>().unwrap(), LossKind::Cross);
        assert!("bogus".parse::<LossKind>().is_err());
    }
}
