//! Synthetic hazy/clear image pairs.

mod dataset;
mod scatter;
mod scene;

pub use dataset::{gen_dataset, manifest_path, Dataset, DatasetManifest, ImagePair, PairRecord, BETA_RANGE, AIRLIGHT_RANGE};
pub use scatter::{apply_haze, transmission, HazeParams};
pub use scene::{render_clear, SceneSpec, DEFAULT_PALETTE};
