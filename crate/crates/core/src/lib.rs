//! Deterministic procedural generator of synthetic aerial imagery, with
//! dataset tooling (manifests, splits, augmentation, validation) and
//! evaluation metrics for fire classification and house counting.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod groundtruth;
pub mod raster;
pub mod scene;
pub mod seed;

pub use config::{GeneratorConfig, ObjectClass, Scenario};
pub use groundtruth::{
    derive_ground_truth, render_density_map, ClassLabel, DensityMap, GroundTruth,
};
pub use raster::{render_scene, Raster, Rgb};
pub use scene::{sample_scene, SceneError, SceneGraph};
pub use seed::derive_image_seed;
