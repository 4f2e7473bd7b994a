//! Planar projective geometry and raster images.
//!
//! Coordinates follow the pixel-corner convention: pixel `(c, r)` covers
//! `[c, c+1) x [r, r+1)` and its sample sits at `(c + 0.5, r + 0.5)`.

mod homography;
mod orientation;
pub mod polygon;
mod raster;
mod stats;
mod warp;

pub use homography::{apply_homography, homography_from_correspondences, PerspectiveParams};
pub use orientation::{
    detect_blade_direction, detect_flip_heuristic, BladeDirection, FlipEstimate, Orientation,
};
pub use raster::RasterImage;
pub use stats::{denormalize_params, normalize_params, ParamStats};
pub use warp::{flip_horizontal, flip_vertical, warp_image};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the image (or millimetre) plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(&'static str),
    #[error("point maps to infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("transform is not invertible")]
    NonInvertibleTransform,
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("output size must be at least 1x1")]
    EmptyOutput,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("image io: {0}")]
    Io(String),
}
