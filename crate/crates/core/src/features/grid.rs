use crate::error::{Error, Result};
use crate::format::Tensor;

/// `rows x cols x dim` token grid stored row-major. The flattened token
/// index is `mu * cols + nu`, so the column index varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        FeatureGrid {
            rows,
            cols,
            dim,
            data: vec![0.0; rows * cols * dim],
        }
    }

    pub fn from_data(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * dim {
            return Err(Error::Dimension(format!(
                "feature grid {rows}x{cols}x{dim} needs {} values, got {}",
                rows * cols * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("feature grid contains non-finite values".into()));
        }
        Ok(FeatureGrid {
            rows,
            cols,
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn token(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn token_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn at(&self, mu: usize, nu: usize) -> &[f64] {
        self.token(mu * self.cols + nu)
    }

    pub fn same_shape(&self, other: &FeatureGrid) -> bool {
        (self.rows, self.cols, self.dim) == (other.rows, other.cols, other.dim)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::f64(vec![self.rows, self.cols, self.dim], self.data.clone())
            .expect("grid shape is consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims[..] {
            [r, c, d] => Self::from_data(r, c, d, t.to_f64()),
            _ => Err(Error::Dimension(format!(
                "feature grid must be 3-d [H', W', D], got {:?}",
                t.dims
            ))),
        }
    }
}
