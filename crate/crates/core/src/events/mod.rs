//! Raw events, windowing, voxel grids, density maps and activation masks.

mod density;
mod io;
mod stream;
mod voxel;

pub use density::{activation_mask, density_map, ActivationMask, DensityMap, DEFAULT_PATCH, DEFAULT_TAU};
pub use io::{read_csv, read_events, write_csv, EVT1_MAGIC, EVT1_RECORD_BYTES};
pub use stream::{sample_window, EventRecord, EventStream, Window};
pub use voxel::{voxelize, voxelize_with, EventVolume, DEFAULT_BINS};
