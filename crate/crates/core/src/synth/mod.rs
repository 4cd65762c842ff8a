//! Seeded synthetic scenes and a brightness-change event simulator.
//!
//! Produces aligned (frame, event stream, label map) triplets: two rendered
//! frames of moving flat-shaded objects, the events a log-intensity
//! threshold camera would emit between them, and per-pixel object ids.

mod dataset;
mod esim;
mod scene;

pub use dataset::{
    generate_dataset, generate_dataset_with, load_manifest, synthesize_scene, Manifest, SceneSample,
    SynthConfig, Triplet, CLASS_COUNT, MANIFEST_NAME,
};
pub use esim::{esim_events, DEFAULT_CONTRAST, DEFAULT_LOG_EPS};
pub use scene::{render_frame, render_labels, Frame, LabelMap, Scene, SceneObject, Shape};
