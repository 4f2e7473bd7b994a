//! From a pose-normalised key mask to a validated bitting code.

mod boundary;
mod keyspec;
mod mask;
mod pins;
mod segment;

pub use boundary::{count_components, extract_boundary};
pub use keyspec::{edge_height_mm, BittingCode, CutGeometry, DepthChart, KeySpec};
pub use mask::{BitMask, Keypoints, PixelBox};
pub use pins::{
    cast_virtual_pins, decode_mask, heights_to_code, locate_keypoints, validate_macs, MacsReport,
    MacsViolation,
};
pub(crate) use segment::{fill_holes, largest_component};
pub use segment::{segment_threshold, segment_threshold_with, SegmentOptions, Segmentation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BittingError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("mask has {0} connected components, expected one")]
    MultipleComponents(usize),
    #[error("threshold found no foreground")]
    NoForeground,
    #[error("blade is degenerate (shoulder and tip coincide)")]
    DegenerateBlade,
    #[error("mask has no keypoints")]
    MissingKeypoints,
    #[error("virtual pin {0} missed the key")]
    RayMiss(usize),
    #[error("virtual pin {0} falls outside the blade")]
    OutOfFrame(usize),
    #[error("code has {got} pins, key spec expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("depth {0} is outside the depth chart")]
    DepthOutOfRange(u8),
    #[error("invalid key spec: {0}")]
    InvalidKeySpec(String),
    #[error("cannot parse bitting code {0:?}")]
    ParseCode(String),
    #[error("io: {0}")]
    Io(String),
}
