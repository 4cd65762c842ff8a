//! Structure-aware cross-modal distillation for event cameras.
//!
//! The pipeline runs end to end at desk scale:
//!
//! - [`events`]: event streams, windowing, voxel grids, density maps and activation masks
//! - [`synth`]: a seeded scene renderer and a brightness-change event simulator
//! - [`features`]: the patch-MLP student, a synthetic teacher, feature tensor I/O
//! - [`losses`]: masked L1 plus intra- and cross-modal Gram structure losses, with gradients
//! - [`trainer`]: AdamW, the pretraining loop, checkpoints and evaluation
//! - [`probe`]: frozen-feature ridge probing and segmentation metrics
//! - [`cli`]: the `eventdistill` command-line front end

pub mod cli;
pub mod error;
pub mod events;
pub mod features;
pub mod format;
pub mod losses;
pub mod netpbm;
pub mod par;
pub mod probe;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
