use super::grid::FeatureGrid;
use crate::error::{Error, Result};
use crate::netpbm::Image8;

/// Cosine similarity of every token to one anchor token.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl SimilarityMap {
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.values[mu * self.cols + nu]
    }

    /// Gray image with [-1, 1] mapped linearly onto [0, 255].
    pub fn to_image(&self) -> Image8 {
        let data = self
            .values
            .iter()
            .map(|&s| ((s.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0).round() as u8)
            .collect();
        Image8::new(self.cols, self.rows, 1, data).expect("map shape is consistent")
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Tokens with zero norm get similarity 0.
pub fn similarity_map(grid: &FeatureGrid, anchor: (usize, usize)) -> Result<SimilarityMap> {
    let (mu, nu) = anchor;
    if mu >= grid.rows() || nu >= grid.cols() {
        return Err(Error::Parameter(format!(
            "anchor ({mu}, {nu}) outside {}x{} grid",
            grid.rows(),
            grid.cols()
        )));
    }
    let a = grid.at(mu, nu);
    let na = norm(a);
    if na == 0.0 {
        return Err(Error::DegenerateAnchor(mu, nu));
    }
    let values = (0..grid.tokens())
        .map(|t| {
            let b = grid.token(t);
            let nb = norm(b);
            if nb == 0.0 {
                return 0.0;
            }
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (dot / (na * nb)).clamp(-1.0, 1.0)
        })
        .collect();
    Ok(SimilarityMap {
        rows: grid.rows(),
        cols: grid.cols(),
        values,
    })
}
