//! Synthetic ground truth: key silhouettes rendered from known codes,
//! marker-framed scenes under known homographies, and seeded augmentations.

mod augment;
mod dataset;
mod render;
mod scene;

pub use augment::{augment, augment_with, AugmentParams};
pub use dataset::{
    generate_dataset, generate_scene, manifest_path, scene_id, scene_seed, DatasetOptions,
    Manifest, ManifestHeader, Scene, MANIFEST_FORMAT,
};
pub use render::{
    patch_px_per_mm, random_code, render_key_mask, render_key_mask_with, render_patch_mask,
    render_patch_mask_with, RenderStyle,
};
pub(crate) use scene::mask_box_in_scene;
pub use scene::{
    canonical_frame_corners, compose_scene, random_background, random_scene_theta, SceneAnnotation,
    SceneOptions, SceneRecipe,
};

use thiserror::Error;

use crate::bitting::MacsReport;
use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("code violates MACS: {0:?}")]
    MacsViolation(MacsReport),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("key does not fit in the scene")]
    KeyOutOfFrame,
    #[error("augmentation would clip the key")]
    AugmentationClipsKey,
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("manifest has no scenes")]
    EmptyDataset,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io: {0}")]
    Io(String),
}
