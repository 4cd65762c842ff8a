use super::voxel::EventVolume;
use crate::error::{Error, Result};
use crate::format::Tensor;

pub const DEFAULT_PATCH: usize = 16;
pub const DEFAULT_TAU: f64 = 64.0;

/// Per-patch event activity: `rows x cols` non-negative sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    rows: usize,
    cols: usize,
    patch: usize,
    data: Vec<f64>,
}

impl DensityMap {
    pub fn from_data(rows: usize, cols: usize, patch: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "density map {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::Parameter("density values must be non-negative".into()));
        }
        Ok(DensityMap {
            rows,
            cols,
            patch,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.data[mu * self.cols + nu]
    }
}

/// Sums `|volume|` over each `patch x patch` block and all bins.
///
/// The absolute value is taken per accumulated cell, so opposite polarities
/// that cancel within one cell and bin contribute nothing.
pub fn density_map(volume: &EventVolume, patch: usize) -> Result<DensityMap> {
    if patch == 0 {
        return Err(Error::Parameter("patch size must be positive".into()));
    }
    let (h, w, b) = (volume.height(), volume.width(), volume.bins());
    if h % patch != 0 || w % patch != 0 {
        return Err(Error::Dimension(format!(
            "{w}x{h} volume is not divisible by patch {patch}"
        )));
    }
    let (rows, cols) = (h / patch, w / patch);
    let mut data = vec![0.0; rows * cols];
    let src = volume.data();
    for y in 0..h {
        let mu = y / patch;
        for x in 0..w {
            let cell = &src[(y * w + x) * b..(y * w + x + 1) * b];
            data[mu * cols + x / patch] += cell.iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    Ok(DensityMap {
        rows,
        cols,
        patch,
        data,
    })
}

/// Binary `rows x cols` token mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMask {
    rows: usize,
    cols: usize,
    tau: f64,
    bits: Vec<bool>,
}

impl ActivationMask {
    pub fn from_bits(rows: usize, cols: usize, tau: f64, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "mask {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                bits.len()
            )));
        }
        Ok(ActivationMask {
            rows,
            cols,
            tau,
            bits,
        })
    }

    /// Every token active.
    pub fn full(rows: usize, cols: usize) -> Self {
        ActivationMask {
            rows,
            cols,
            tau: 0.0,
            bits: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, mu: usize, nu: usize) -> bool {
        self.bits[mu * self.cols + nu]
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `[rows, cols]` tensor of 0.0 / 1.0.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Tensor::f64(vec![self.rows, self.cols], data).expect("mask shape is consistent")
    }
}

/// `M(μ, ν) = 1` iff `D(μ, ν) >= tau`.
pub fn activation_mask(density: &DensityMap, tau: f64) -> Result<ActivationMask> {
    if !(tau >= 0.0) {
        return Err(Error::Parameter(format!("tau must be non-negative, got {tau}")));
    }
    Ok(ActivationMask {
        rows: density.rows,
        cols: density.cols,
        tau,
        bits: density.data.iter().map(|&d| d >= tau).collect(),
    })
}
