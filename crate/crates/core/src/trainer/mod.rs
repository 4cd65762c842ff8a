//! AdamW pretraining of the event student against the frozen teacher.

mod adamw;
mod checkpoint;
mod config;
mod pretrain;

pub use adamw::{AdamW, OptimizerState};
pub use checkpoint::{Checkpoint, StepRecord};
pub use config::{Dtype, TrainConfig, PRESETS};
pub use pretrain::{
    eval_structure_discrepancy, evaluate_objective, prepare_manifest, prepare_sample, prepare_samples,
    pretrain, structure_discrepancy, PreparedSample, StructureDiscrepancy, TrainOptions, TrainOutcome,
};
