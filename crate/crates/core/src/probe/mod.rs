//! Linear probing of frozen token features on token-level segmentation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{student_forward, FeatureGrid, StudentParams};
use crate::par::{self, Execution};
use crate::synth::{LabelMap, Manifest};
use crate::trainer::PreparedSample;

pub const DEFAULT_ALPHA: f64 = 1e-3;

/// Few-shot fractions evaluated by default.
pub const FEW_SHOT_FRACTIONS: [f64; 4] = [0.01, 0.05, 0.10, 0.20];

/// Smallest accepted ratio of a Cholesky pivot to the largest diagonal entry.
const PIVOT_RATIO: f64 = 1e-12;

/// One class id per token, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLabels {
    pub rows: usize,
    pub cols: usize,
    pub ids: Vec<u8>,
}

impl TokenLabels {
    pub fn new(rows: usize, cols: usize, ids: Vec<u8>) -> Result<Self> {
        if ids.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} token labels need {} ids, got {}",
                rows * cols,
                ids.len()
            )));
        }
        Ok(TokenLabels { rows, cols, ids })
    }
}

/// Majority label per `patch x patch` block; ties go to the lowest id.
pub fn downsample_labels(labels: &LabelMap, patch: usize) -> Result<TokenLabels> {
    if patch == 0 || !labels.width.is_multiple_of(patch) || !labels.height.is_multiple_of(patch) {
        return Err(Error::Dimension(format!(
            "{}x{} label map is not divisible by patch {patch}",
            labels.width, labels.height
        )));
    }
    let (rows, cols) = (labels.height / patch, labels.width / patch);
    let mut ids = Vec::with_capacity(rows * cols);
    let mut counts = [0usize; 256];
    for mu in 0..rows {
        for nu in 0..cols {
            counts.fill(0);
            for y in mu * patch..(mu + 1) * patch {
                for x in nu * patch..(nu + 1) * patch {
                    counts[labels.get(y, x) as usize] += 1;
                }
            }
            // max_by_key keeps the last maximum, so scan ids in reverse
            let best = (0..256).rev().max_by_key(|&c| counts[c]).unwrap_or(0);
            ids.push(best as u8);
        }
    }
    TokenLabels::new(rows, cols, ids)
}

/// Linear head `argmax(Wᵀx + b)` over `classes` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub dim: usize,
    pub classes: usize,
    /// `dim x classes`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub alpha: f64,
}

impl ProbeModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.bias.clone();
        for (d, &xd) in x.iter().enumerate() {
            let row = &self.weight[d * self.classes..(d + 1) * self.classes];
            s.iter_mut().zip(row).for_each(|(a, w)| *a += w * xd);
        }
        s
    }

    /// Highest-scoring class, lowest id on ties.
    pub fn predict_token(&self, x: &[f64]) -> u8 {
        let s = self.scores(x);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        best as u8
    }

    pub fn predict(&self, grid: &FeatureGrid) -> Result<TokenLabels> {
        if grid.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "probe expects {}-d features, got {}",
                self.dim,
                grid.dim()
            )));
        }
        let ids = (0..grid.tokens()).map(|t| self.predict_token(grid.token(t))).collect();
        TokenLabels::new(grid.rows(), grid.cols(), ids)
    }
}

/// Ridge regression of one-hot targets on tokens with an unpenalized bias.
///
/// Solves `(XᵀX + αI) W = XᵀY` over all training tokens through a Cholesky
/// factorization; the identity omits the bias row.
pub fn fit_probe(features: &[FeatureGrid], labels: &[TokenLabels], classes: usize, alpha: f64) -> Result<ProbeModel> {
    if classes < 2 {
        return Err(Error::Parameter("a probe needs at least 2 classes".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("alpha must be a finite non-negative number, got {alpha}")));
    }
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Dimension(format!(
            "{} feature grids for {} label grids",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].dim();
    let mut present = vec![false; classes];
    for (f, l) in features.iter().zip(labels) {
        if f.dim() != dim || (f.rows(), f.cols()) != (l.rows, l.cols) {
            return Err(Error::Dimension("feature and label grids do not match".into()));
        }
        for &id in &l.ids {
            let id = id as usize;
            if id >= classes {
                return Err(Error::Parameter(format!("label {id} outside {classes} classes")));
            }
            present[id] = true;
        }
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::MissingClass(c));
    }

    let m = dim + 1;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DMatrix::<f64>::zeros(m, classes);
    let mut x = DVector::<f64>::zeros(m);
    x[dim] = 1.0;
    for (f, l) in features.iter().zip(labels) {
        for (t, &id) in l.ids.iter().enumerate() {
            x.rows_mut(0, dim).copy_from_slice(f.token(t));
            gram.ger(1.0, &x, &x, 1.0);
            for r in 0..m {
                rhs[(r, id as usize)] += x[r];
            }
        }
    }
    for d in 0..dim {
        gram[(d, d)] += alpha;
    }

    let max_diag = (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let chol = gram.clone().cholesky().ok_or(Error::Singular)?;
    let l = chol.l_dirty();
    let min_pivot = (0..m).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_RATIO * max_diag) {
        return Err(Error::Singular);
    }
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("probe solution is not finite".into()));
    }
    let mut weight = Vec::with_capacity(dim * classes);
    for d in 0..dim {
        weight.extend((0..classes).map(|c| sol[(d, c)]));
    }
    let bias = (0..classes).map(|c| sol[(dim, c)]).collect();
    Ok(ProbeModel {
        dim,
        classes,
        weight,
        bias,
        alpha,
    })
}

/// Class confusion counts, `gt x pred`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Confusion {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, pred: &TokenLabels, gt: &TokenLabels) -> Result<()> {
        if (pred.rows, pred.cols) != (gt.rows, gt.cols) {
            return Err(Error::Dimension("prediction and ground truth grids differ".into()));
        }
        for (&p, &g) in pred.ids.iter().zip(&gt.ids) {
            let (p, g) = (p as usize, g as usize);
            if p >= self.classes || g >= self.classes {
                return Err(Error::Parameter(format!("label outside {} classes", self.classes)));
            }
            self.counts[g * self.classes + p] += 1;
        }
        Ok(())
    }

    pub fn report(&self) -> MiouReport {
        let c = self.classes;
        let at = |g: usize, p: usize| self.counts[g * c + p] as f64;
        let mut per_class_iou = Vec::with_capacity(c);
        let mut recalls = Vec::new();
        for k in 0..c {
            let tp = at(k, k);
            let gt_k: f64 = (0..c).map(|p| at(k, p)).sum();
            let pred_k: f64 = (0..c).map(|g| at(g, k)).sum();
            let union = gt_k + pred_k - tp;
            per_class_iou.push((union > 0.0).then(|| tp / union));
            if gt_k > 0.0 {
                recalls.push(tp / gt_k);
            }
        }
        let ious: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        MiouReport {
            miou: mean(&ious),
            acc: mean(&recalls),
            per_class_iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiouReport {
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    /// Mean per-class recall over classes present in the ground truth.
    pub acc: f64,
}

pub fn miou(pred: &TokenLabels, gt: &TokenLabels, classes: usize) -> Result<MiouReport> {
    let mut c = Confusion::new(classes);
    c.add(pred, gt)?;
    Ok(c.report())
}

/// Indices `0, k, 2k, …` below `n` with `k = round(1/fraction)`.
pub fn stride_indices(n: usize, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let k = (1.0 / fraction).round() as usize;
    Ok((0..n).step_by(k).collect())
}

pub fn stride_subsample(manifest: &Manifest, fraction: f64) -> Result<Manifest> {
    Ok(manifest.subset(stride_indices(manifest.len(), fraction)?))
}

pub fn extract_features(params: &StudentParams, samples: &[PreparedSample], exec: Execution) -> Result<Vec<FeatureGrid>> {
    par::map(exec, samples, |s| student_forward(params, &s.volume))
        .into_iter()
        .collect()
}

/// Fits a probe on `train` and scores it on `test` with frozen `params`.
pub fn probe_student(
    params: &StudentParams,
    train: &[PreparedSample],
    test: &[PreparedSample],
    classes: usize,
    alpha: f64,
    exec: Execution,
) -> Result<MiouReport> {
    let labels = |s: &[PreparedSample]| -> Result<Vec<TokenLabels>> {
        s.iter().map(|p| downsample_labels(&p.labels, params.patch)).collect()
    };
    let model = fit_probe(&extract_features(params, train, exec)?, &labels(train)?, classes, alpha)?;
    let mut conf = Confusion::new(classes);
    for (f, gt) in extract_features(params, test, exec)?.iter().zip(labels(test)?) {
        conf.add(&model.predict(f)?, &gt)?;
    }
    Ok(conf.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tl(ids: &[u8], cols: usize) -> TokenLabels {
        TokenLabels::new(ids.len() / cols, cols, ids.to_vec()).unwrap()
    }

    #[test]
    fn downsampling_rules() {
        let uniform = LabelMap::new(4, 4, vec![2; 16]).unwrap();
        assert_eq!(downsample_labels(&uniform, 2).unwrap().ids, vec![2; 4]);
        // half 1, half 2 → tie → 1
        let split = LabelMap::new(2, 2, vec![2, 1, 1, 2]).unwrap();
        assert_eq!(downsample_labels(&split, 2).unwrap().ids, vec![1]);
        let m = LabelMap::new(3, 2, vec![0, 1, 2, 3, 0, 1]).unwrap();
        assert_eq!(downsample_labels(&m, 1).unwrap().ids, m.ids);
        assert!(downsample_labels(&m, 2).is_err());
    }

    #[test]
    fn miou_examples() {
        let gt = tl(&[0, 1, 2, 3], 2);
        let r = miou(&gt, &gt, 4).unwrap();
        assert_eq!((r.miou, r.acc), (1.0, 1.0));

        let gt = tl(&[0, 0, 1, 1], 4);
        let pred = tl(&[0, 0, 0, 0], 4);
        let r = miou(&pred, &gt, 2).unwrap();
        assert_eq!(r.per_class_iou, vec![Some(0.5), Some(0.0)]);
        assert_eq!(r.miou, 0.25);
        assert_eq!(r.acc, 0.5);

        // class 2 absent from both is excluded rather than counted as zero
        let r = miou(&pred, &gt, 3).unwrap();
        assert_eq!(r.per_class_iou[2], None);
        assert_eq!(r.miou, 0.25);
    }

    #[test]
    fn one_hot_features_fit_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<u8> = (0..64).map(|i| if i < 4 { i as u8 } else { rng.random_range(0..4) }).collect();
        let data: Vec<f64> = ids
            .iter()
            .flat_map(|&id| (0..4).map(move |c| if c == id as usize { 1.0 } else { 0.0 }))
            .collect();
        let f = FeatureGrid::from_data(8, 8, 4, data).unwrap();
        let l = tl(&ids, 8);
        let model = fit_probe(std::slice::from_ref(&f), std::slice::from_ref(&l), 4, 1e-8).unwrap();
        let r = miou(&model.predict(&f).unwrap(), &l, 4).unwrap();
        assert_eq!(r.miou, 1.0);
    }

    #[test]
    fn random_labels_give_chance_accuracy() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..1024 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ids: Vec<u8> = (0..1024).map(|_| rng.random_range(0..4)).collect();
            let f = FeatureGrid::from_data(32, 32, 8, data).unwrap();
            let l = tl(&ids, 32);
            let model = fit_probe(std::slice::from_ref(&f), std::slice::from_ref(&l), 4, DEFAULT_ALPHA).unwrap();
            let r = miou(&model.predict(&f).unwrap(), &l, 4).unwrap();
            assert!((r.acc - 0.25).abs() < 0.15, "seed {seed}: {}", r.acc);
        }
    }

    #[test]
    fn duplication_without_penalty_leaves_weights_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..48 * 5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ids: Vec<u8> = (0..48).map(|i| (i % 3) as u8).collect();
        let f = FeatureGrid::from_data(6, 8, 5, data).unwrap();
        let l = tl(&ids, 8);
        let once = fit_probe(std::slice::from_ref(&f), std::slice::from_ref(&l), 3, 0.0).unwrap();
        let twice = fit_probe(&[f.clone(), f.clone()], &[l.clone(), l.clone()], 3, 0.0).unwrap();
        for (a, b) in once.weight.iter().chain(&once.bias).zip(twice.weight.iter().chain(&twice.bias)) {
            assert!((a - b).abs() < 1e-10);
        }
        // with a penalty, duplicating the data is the same as halving alpha
        let twice = fit_probe(&[f.clone(), f.clone()], &[l.clone(), l.clone()], 3, 0.2).unwrap();
        let half = fit_probe(&[f], &[l], 3, 0.1).unwrap();
        for (a, b) in half.weight.iter().zip(&twice.weight) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_and_missing_class_errors() {
        // identical tokens: constant feature duplicates the bias column
        let f = FeatureGrid::from_data(1, 4, 2, vec![1.0; 8]).unwrap();
        let l = tl(&[0, 1, 0, 1], 4);
        assert!(matches!(fit_probe(std::slice::from_ref(&f), std::slice::from_ref(&l), 2, 0.0), Err(Error::Singular)));
        assert!(fit_probe(std::slice::from_ref(&f), &[l], 2, 1e-3).is_ok());
        let l = tl(&[0, 0, 0, 0], 4);
        assert!(matches!(fit_probe(&[f], &[l], 2, 1e-3), Err(Error::MissingClass(1))));
    }

    #[test]
    fn stride_examples() {
        assert_eq!(stride_indices(7, 1.0).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(stride_indices(100, 0.10).unwrap(), (0..10).map(|i| i * 10).collect::<Vec<_>>());
        assert_eq!(stride_indices(5, 0.01).unwrap(), vec![0]);
        assert_eq!(stride_indices(100, 0.05).unwrap().len(), 5);
        assert!(stride_indices(5, 0.0).is_err());
        assert!(stride_indices(5, 1.5).is_err());
    }
}
