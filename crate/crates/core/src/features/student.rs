//! Patch-wise MLP event encoder.
//!
//! Each `P x P x B` block of the event volume is flattened in `(y, x, b)`
//! row-major order and mapped to one `D`-dimensional token through
//! `affine -> tanh -> affine`, or a single affine map when the hidden width
//! is zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::FeatureGrid;
use crate::error::{Error, Result};
use crate::events::EventVolume;
use crate::par::{self, Execution};

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_FEATURE_DIM: usize = 16;

/// Dense `out x inp` weight (row-major) plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub out: usize,
    pub inp: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Affine {
            out,
            inp,
            weight: vec![0.0; out * inp],
            bias: vec![0.0; out],
        }
    }

    fn xavier(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inp + out) as f64).sqrt();
        let weight = (0..out * inp).map(|_| rng.random_range(-limit..=limit)).collect();
        Affine {
            out,
            inp,
            weight,
            bias: vec![0.0; out],
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.inp..(o + 1) * self.inp];
            *yo = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `weight += g ⊗ x`, `bias += g`.
    fn accumulate_outer(&mut self, g: &[f64], x: &[f64]) {
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            self.bias[o] += go;
            let row = &mut self.weight[o * self.inp..(o + 1) * self.inp];
            for (w, v) in row.iter_mut().zip(x) {
                *w += go * v;
            }
        }
    }

    fn add_assign(&mut self, other: &Affine) {
        self.weight.iter_mut().zip(&other.weight).for_each(|(a, b)| *a += b);
        self.bias.iter_mut().zip(&other.bias).for_each(|(a, b)| *a += b);
    }
}

/// Encoder weights together with the geometry they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentParams {
    pub patch: usize,
    pub bins: usize,
    pub hidden: usize,
    pub dim: usize,
    pub seed: u64,
    /// One layer when `hidden == 0`, otherwise input and output layers.
    pub layers: Vec<Affine>,
}

impl StudentParams {
    /// Xavier-uniform weights, zero biases.
    pub fn init(patch: usize, bins: usize, hidden: usize, dim: usize, seed: u64) -> Result<Self> {
        if patch == 0 || bins == 0 || dim == 0 {
            return Err(Error::Parameter("patch, bins and dim must be positive".into()));
        }
        let inp = patch * patch * bins;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = if hidden == 0 {
            vec![Affine::xavier(dim, inp, &mut rng)]
        } else {
            vec![
                Affine::xavier(hidden, inp, &mut rng),
                Affine::xavier(dim, hidden, &mut rng),
            ]
        };
        Ok(StudentParams {
            patch,
            bins,
            hidden,
            dim,
            seed,
            layers,
        })
    }

    pub fn input_len(&self) -> usize {
        self.patch * self.patch * self.bins
    }

    pub fn validate(&self) -> Result<()> {
        let shapes: Vec<(usize, usize)> = if self.hidden == 0 {
            vec![(self.dim, self.input_len())]
        } else {
            vec![(self.hidden, self.input_len()), (self.dim, self.hidden)]
        };
        let ok = self.layers.len() == shapes.len()
            && self.layers.iter().zip(&shapes).all(|(l, &(o, i))| {
                l.out == o && l.inp == i && l.weight.len() == o * i && l.bias.len() == o
            });
        if !ok {
            return Err(Error::Dimension("student layer shapes are inconsistent".into()));
        }
        if self
            .layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias))
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("student parameters are not finite".into()));
        }
        Ok(())
    }

    /// Named parameter tensors in a fixed order: `layer{i}.weight`, `layer{i}.bias`.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        named(&self.layers)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn zero_grads(&self) -> StudentGrads {
        StudentGrads {
            layers: self.layers.iter().map(|l| Affine::zeros(l.out, l.inp)).collect(),
        }
    }

    fn check_volume(&self, volume: &EventVolume) -> Result<(usize, usize)> {
        let p = self.patch;
        if volume.bins() != self.bins {
            return Err(Error::Dimension(format!(
                "volume has {} bins, encoder expects {}",
                volume.bins(),
                self.bins
            )));
        }
        if !volume.height().is_multiple_of(p) || !volume.width().is_multiple_of(p) {
            return Err(Error::Dimension(format!(
                "{}x{} volume is not divisible by patch {p}",
                volume.width(),
                volume.height()
            )));
        }
        Ok((volume.height() / p, volume.width() / p))
    }

    /// Copies block `(mu, nu)` into `buf` in `(y, x, b)` order.
    fn gather(&self, volume: &EventVolume, mu: usize, nu: usize, buf: &mut [f64]) {
        let p = self.patch;
        let row_len = p * self.bins;
        for dy in 0..p {
            let start = volume.index(mu * p + dy, nu * p, 0);
            buf[dy * row_len..(dy + 1) * row_len]
                .copy_from_slice(&volume.data()[start..start + row_len]);
        }
    }
}

fn named(layers: &[Affine]) -> Vec<(String, &[f64])> {
    layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            [
                (format!("layer{i}.weight"), l.weight.as_slice()),
                (format!("layer{i}.bias"), l.bias.as_slice()),
            ]
        })
        .collect()
}

/// Gradients with the same layout as [`StudentParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudentGrads {
    pub layers: Vec<Affine>,
}

impl StudentGrads {
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        named(&self.layers)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

pub fn student_forward(params: &StudentParams, volume: &EventVolume) -> Result<FeatureGrid> {
    let (rows, cols) = params.check_volume(volume)?;
    let dim = params.dim;
    let mut out = vec![0.0; rows * cols * dim];
    let mut x = vec![0.0; params.input_len()];
    let mut h = vec![0.0; params.hidden];
    for mu in 0..rows {
        for nu in 0..cols {
            params.gather(volume, mu, nu, &mut x);
            let t = mu * cols + nu;
            let y = &mut out[t * dim..(t + 1) * dim];
            if params.hidden == 0 {
                params.layers[0].apply(&x, y);
            } else {
                params.layers[0].apply(&x, &mut h);
                h.iter_mut().for_each(|v| *v = v.tanh());
                params.layers[1].apply(&h, y);
            }
        }
    }
    FeatureGrid::from_data(rows, cols, dim, out)
}

/// Parameter gradients of `<upstream, student_forward(params, volume)>`.
pub fn student_backward(
    params: &StudentParams,
    volume: &EventVolume,
    upstream: &FeatureGrid,
) -> Result<StudentGrads> {
    let (rows, cols) = params.check_volume(volume)?;
    if (upstream.rows(), upstream.cols(), upstream.dim()) != (rows, cols, params.dim) {
        return Err(Error::Dimension(format!(
            "upstream gradient is {}x{}x{}, forward output is {rows}x{cols}x{}",
            upstream.rows(),
            upstream.cols(),
            upstream.dim(),
            params.dim
        )));
    }
    let mut grads = params.zero_grads();
    let mut x = vec![0.0; params.input_len()];
    let mut h = vec![0.0; params.hidden];
    let mut gh = vec![0.0; params.hidden];
    for mu in 0..rows {
        for nu in 0..cols {
            let g = upstream.at(mu, nu);
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            params.gather(volume, mu, nu, &mut x);
            if params.hidden == 0 {
                grads.layers[0].accumulate_outer(g, &x);
                continue;
            }
            params.layers[0].apply(&x, &mut h);
            h.iter_mut().for_each(|v| *v = v.tanh());
            grads.layers[1].accumulate_outer(g, &h);
            let w2 = &params.layers[1];
            for (j, ghj) in gh.iter_mut().enumerate() {
                let back: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(o, go)| go * w2.weight[o * w2.inp + j])
                    .sum();
                *ghj = back * (1.0 - h[j] * h[j]);
            }
            grads.layers[0].accumulate_outer(&gh, &x);
        }
    }
    Ok(grads)
}

pub fn student_forward_batch(
    params: &StudentParams,
    volumes: &[EventVolume],
    exec: Execution,
) -> Result<Vec<FeatureGrid>> {
    par::map(exec, volumes, |v| student_forward(params, v))
        .into_iter()
        .collect()
}

/// Sum of per-sample gradients, reduced in sample order.
pub fn student_backward_batch(
    params: &StudentParams,
    volumes: &[EventVolume],
    upstream: &[FeatureGrid],
    exec: Execution,
) -> Result<StudentGrads> {
    if volumes.len() != upstream.len() {
        return Err(Error::Dimension(format!(
            "{} volumes but {} upstream gradients",
            volumes.len(),
            upstream.len()
        )));
    }
    let pairs: Vec<(&EventVolume, &FeatureGrid)> = volumes.iter().zip(upstream).collect();
    let per_sample = par::map(exec, &pairs, |(v, g)| student_backward(params, v, g));
    let mut total = params.zero_grads();
    for g in per_sample {
        let g = g?;
        for (acc, l) in total.layers.iter_mut().zip(&g.layers) {
            acc.add_assign(l);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_volume(w: usize, h: usize, b: usize) -> EventVolume {
        let data = (0..w * h * b).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1).collect();
        EventVolume::from_data(w, h, b, data).unwrap()
    }

    #[test]
    fn zero_volume_zero_bias_gives_zero_features() {
        let p = StudentParams::init(2, 3, 4, 5, 1).unwrap();
        let g = student_forward(&p, &EventVolume::zeros(4, 6, 3)).unwrap();
        assert_eq!((g.rows(), g.cols(), g.dim()), (3, 2, 5));
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_unit_impulse_selects_weight_column() {
        let mut p = StudentParams::init(2, 2, 0, 3, 4).unwrap();
        p.layers[0].bias = vec![0.5, -1.0, 2.0];
        let mut v = EventVolume::zeros(2, 2, 2);
        // (y=1, x=0, b=1) has flattened index (1*2 + 0)*2 + 1 = 5
        let i = v.index(1, 0, 1);
        v.data_mut()[i] = 1.0;
        let g = student_forward(&p, &v).unwrap();
        let l = &p.layers[0];
        for o in 0..3 {
            assert_eq!(g.token(0)[o], l.weight[o * l.inp + 5] + l.bias[o]);
        }
    }

    #[test]
    fn linear_model_is_homogeneous() {
        let p = StudentParams::init(2, 1, 0, 2, 9).unwrap();
        let v = ramp_volume(4, 2, 1);
        let a = student_forward(&p, &v).unwrap();
        let b = student_forward(&p, &v.scaled(2.0)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.0 * x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = StudentParams::init(2, 2, 3, 2, 2).unwrap();
        let v = ramp_volume(4, 4, 2);
        let g = student_backward(&p, &v, &FeatureGrid::zeros(2, 2, 2)).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn linear_one_token_gradient_is_outer_product() {
        let p = StudentParams::init(2, 1, 0, 2, 5).unwrap();
        let v = ramp_volume(2, 2, 1);
        let up = FeatureGrid::from_data(1, 1, 2, vec![0.3, -2.0]).unwrap();
        let g = student_backward(&p, &v, &up).unwrap();
        let x = v.data();
        for o in 0..2 {
            for i in 0..4 {
                assert_eq!(g.layers[0].weight[o * 4 + i], up.data()[o] * x[i]);
            }
        }
        assert_eq!(g.layers[0].bias, vec![0.3, -2.0]);
    }

    #[test]
    fn shape_errors() {
        let p = StudentParams::init(2, 2, 3, 2, 2).unwrap();
        assert!(student_forward(&p, &EventVolume::zeros(3, 4, 2)).is_err());
        assert!(student_forward(&p, &EventVolume::zeros(4, 4, 3)).is_err());
        let v = ramp_volume(4, 4, 2);
        assert!(student_backward(&p, &v, &FeatureGrid::zeros(2, 2, 3)).is_err());
        assert!(StudentParams::init(0, 1, 1, 1, 0).is_err());
    }

    #[test]
    fn batch_matches_single_and_modes_agree() {
        let p = StudentParams::init(2, 2, 3, 2, 8).unwrap();
        let vols = vec![ramp_volume(4, 4, 2), ramp_volume(4, 4, 2).scaled(-0.5)];
        let ups: Vec<FeatureGrid> = vols
            .iter()
            .map(|v| {
                let f = student_forward(&p, v).unwrap();
                let d = f.data().iter().map(|x| x.sin()).collect();
                FeatureGrid::from_data(2, 2, 2, d).unwrap()
            })
            .collect();
        let seq = student_backward_batch(&p, &vols, &ups, Execution::Sequential).unwrap();
        let par = student_backward_batch(&p, &vols, &ups, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let a = student_backward(&p, &vols[0], &ups[0]).unwrap();
        let b = student_backward(&p, &vols[1], &ups[1]).unwrap();
        let w: Vec<f64> = a.layers[0].weight.iter().zip(&b.layers[0].weight).map(|(x, y)| x + y).collect();
        assert_eq!(seq.layers[0].weight, w);
    }
}
