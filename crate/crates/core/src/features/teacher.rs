//! Deterministic stand-in for a frozen image foundation model.
//!
//! Each `P x P` patch is summarised by `[mean R, mean G, mean B, mu/H', nu/W']`,
//! projected to `D` dimensions by a seeded matrix with orthonormal columns
//! (orthonormal rows when `D < 5`), then box-smoothed over the token grid.
//! With orthonormal columns the teacher Gram matrix equals the descriptor
//! Gram matrix, which carries both colour grouping and spatial locality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::FeatureGrid;
use crate::error::{Error, Result};
use crate::synth::Frame;

pub const DESCRIPTOR_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSpec {
    pub dim: usize,
    pub seed: u64,
    /// Box-smoothing radius in token cells.
    pub radius: usize,
    /// `dim x 5` row-major.
    pub projection: Vec<f64>,
}

impl TeacherSpec {
    pub fn new(dim: usize, seed: u64, radius: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("teacher dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m: Vec<f64> = (0..dim * DESCRIPTOR_LEN)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        if dim >= DESCRIPTOR_LEN {
            orthonormalize(&mut m, dim, DESCRIPTOR_LEN, Axis::Columns);
        } else {
            orthonormalize(&mut m, dim, DESCRIPTOR_LEN, Axis::Rows);
        }
        Ok(TeacherSpec {
            dim,
            seed,
            radius,
            projection: m,
        })
    }

    fn project(&self, desc: &[f64; DESCRIPTOR_LEN], out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            let row = &self.projection[d * DESCRIPTOR_LEN..(d + 1) * DESCRIPTOR_LEN];
            *o = row.iter().zip(desc).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Columns,
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass.
fn orthonormalize(m: &mut [f64], rows: usize, cols: usize, axis: Axis) {
    let (count, len) = match axis {
        Axis::Columns => (cols, rows),
        Axis::Rows => (rows, cols),
    };
    let idx = |v: usize, k: usize| match axis {
        Axis::Columns => k * cols + v,
        Axis::Rows => v * cols + k,
    };
    for v in 0..count {
        for _pass in 0..2 {
            for u in 0..v {
                let dot: f64 = (0..len).map(|k| m[idx(u, k)] * m[idx(v, k)]).sum();
                for k in 0..len {
                    m[idx(v, k)] -= dot * m[idx(u, k)];
                }
            }
        }
        let norm = (0..len).map(|k| m[idx(v, k)].powi(2)).sum::<f64>().sqrt();
        for k in 0..len {
            m[idx(v, k)] /= norm;
        }
    }
}

/// Per-patch colour and position descriptors, `rows x cols x 5`.
fn descriptors(frame: &Frame, patch: usize) -> Result<(usize, usize, Vec<[f64; DESCRIPTOR_LEN]>)> {
    if patch == 0 || !frame.height.is_multiple_of(patch) || !frame.width.is_multiple_of(patch) {
        return Err(Error::Dimension(format!(
            "{}x{} frame is not divisible by patch {patch}",
            frame.width, frame.height
        )));
    }
    let (rows, cols) = (frame.height / patch, frame.width / patch);
    let area = (patch * patch) as f64;
    let mut out = Vec::with_capacity(rows * cols);
    for mu in 0..rows {
        for nu in 0..cols {
            let mut rgb = [0.0; 3];
            for y in mu * patch..(mu + 1) * patch {
                for x in nu * patch..(nu + 1) * patch {
                    let px = frame.rgb(y, x);
                    (0..3).for_each(|c| rgb[c] += px[c]);
                }
            }
            out.push([
                rgb[0] / area,
                rgb[1] / area,
                rgb[2] / area,
                mu as f64 / rows as f64,
                nu as f64 / cols as f64,
            ]);
        }
    }
    Ok((rows, cols, out))
}

fn box_smooth(grid: &FeatureGrid, radius: usize) -> FeatureGrid {
    if radius == 0 {
        return grid.clone();
    }
    let (rows, cols, dim) = (grid.rows(), grid.cols(), grid.dim());
    let mut out = FeatureGrid::zeros(rows, cols, dim);
    for mu in 0..rows {
        for nu in 0..cols {
            let (m0, m1) = (mu.saturating_sub(radius), (mu + radius).min(rows - 1));
            let (n0, n1) = (nu.saturating_sub(radius), (nu + radius).min(cols - 1));
            let count = ((m1 - m0 + 1) * (n1 - n0 + 1)) as f64;
            let acc = out.token_mut(mu * cols + nu);
            for m in m0..=m1 {
                for n in n0..=n1 {
                    acc.iter_mut().zip(grid.at(m, n)).for_each(|(a, v)| *a += v);
                }
            }
            acc.iter_mut().for_each(|a| *a /= count);
        }
    }
    out
}

pub fn teacher_forward(spec: &TeacherSpec, frame: &Frame, patch: usize) -> Result<FeatureGrid> {
    let (rows, cols, desc) = descriptors(frame, patch)?;
    let mut grid = FeatureGrid::zeros(rows, cols, spec.dim);
    for (t, d) in desc.iter().enumerate() {
        spec.project(d, grid.token_mut(t));
    }
    Ok(box_smooth(&grid, spec.radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(w: usize, h: usize, c: [f64; 3]) -> Frame {
        let pixels = (0..w * h).flat_map(|_| c).collect();
        Frame::new(w, h, 0, pixels).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    #[test]
    fn projection_columns_are_orthonormal() {
        for dim in [5, 8, 16] {
            let s = TeacherSpec::new(dim, 3, 1).unwrap();
            for i in 0..DESCRIPTOR_LEN {
                for j in 0..DESCRIPTOR_LEN {
                    let d: f64 = (0..dim)
                        .map(|r| s.projection[r * 5 + i] * s.projection[r * 5 + j])
                        .sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10, "dim {dim} ({i},{j}) = {d}");
                }
            }
        }
    }

    #[test]
    fn narrow_projection_has_orthonormal_rows() {
        let s = TeacherSpec::new(3, 3, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&s.projection[i * 5..i * 5 + 5], &s.projection[j * 5..j * 5 + 5]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_frame_differs_only_by_position() {
        let s = TeacherSpec::new(8, 1, 0).unwrap();
        let g = teacher_forward(&s, &uniform(8, 8, [0.3, 0.6, 0.9]), 4).unwrap();
        // identical colours, so token differences are the projected position deltas
        let diff: Vec<f64> = g.at(1, 1).iter().zip(g.at(0, 1)).map(|(a, b)| a - b).collect();
        let mut want = vec![0.0; 8];
        s.project(&[0.0, 0.0, 0.0, 0.5, 0.0], &mut want);
        for (a, b) in diff.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(g.at(0, 0), g.at(0, 0));
        assert_ne!(g.at(0, 0), g.at(1, 0));
    }

    #[test]
    fn same_color_neighbours_are_more_similar() {
        // left half red, right half blue; 4 x 2 tokens of 4 px
        let (w, h) = (16, 8);
        let mut pixels = Vec::new();
        for _y in 0..h {
            for x in 0..w {
                pixels.extend_from_slice(if x < 8 { &[1.0, 0.0, 0.0] } else { &[0.0, 0.0, 1.0] });
            }
        }
        let frame = Frame::new(w, h, 0, pixels).unwrap();
        let s = TeacherSpec::new(16, 0, 0).unwrap();
        let g = teacher_forward(&s, &frame, 4).unwrap();
        let same = cos(g.at(0, 0), g.at(0, 1));
        let different = cos(g.at(0, 1), g.at(0, 2));
        assert!(same > different, "{same} vs {different}");
    }

    #[test]
    fn deterministic_and_smoothing_averages() {
        let frame = Frame::new(
            4,
            2,
            0,
            (0..24).map(|i| (i % 5) as f64 / 4.0).collect(),
        )
        .unwrap();
        let s = TeacherSpec::new(6, 9, 1).unwrap();
        assert_eq!(teacher_forward(&s, &frame, 2).unwrap(), teacher_forward(&s, &frame, 2).unwrap());
        let raw = teacher_forward(&TeacherSpec { radius: 0, ..s.clone() }, &frame, 2).unwrap();
        let smooth = teacher_forward(&s, &frame, 2).unwrap();
        // a 1 x 2 grid with radius 1 averages both tokens everywhere
        for d in 0..6 {
            let mean = 0.5 * (raw.token(0)[d] + raw.token(1)[d]);
            assert!((smooth.token(0)[d] - mean).abs() < 1e-15);
            assert!((smooth.token(1)[d] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn geometry_errors() {
        let s = TeacherSpec::new(4, 0, 0).unwrap();
        assert!(teacher_forward(&s, &uniform(6, 4, [0.0; 3]), 4).is_err());
        assert!(TeacherSpec::new(0, 0, 0).is_err());
    }
}
