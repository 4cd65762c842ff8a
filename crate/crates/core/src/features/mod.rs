//! Student encoder, synthetic teacher, feature grids and similarity maps.

mod grid;
mod similarity;
mod student;
mod teacher;

pub use grid::FeatureGrid;
pub use similarity::{similarity_map, SimilarityMap};
pub use student::{
    student_backward, student_backward_batch, student_forward, student_forward_batch, Affine,
    StudentGrads, StudentParams, DEFAULT_FEATURE_DIM, DEFAULT_HIDDEN,
};
pub use teacher::{teacher_forward, TeacherSpec, DESCRIPTOR_LEN};

use std::path::Path;

use crate::error::Result;
use crate::format::Tensor;

/// Reads an `FTN1` `[H', W', D]` tensor, e.g. features exported from another model.
pub fn load_teacher_features(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    FeatureGrid::from_tensor(&Tensor::load(path)?)
}

/// Writes `grid` as a 64-bit `FTN1` tensor.
pub fn save_features(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    grid.to_tensor().save(path)
}
