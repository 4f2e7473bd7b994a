//! Recovering pin-tumbler key bitting from images and turning it into a
//! printable model.
//!
//! - [`geometry`]: homographies, perspective warps, flips, parameter
//!   normalisation and orientation cues.
//! - [`bitting`]: threshold segmentation, boundary tracing, keypoints,
//!   virtual pins and depth decoding.
//! - [`model3d`]: height profiles, blade and bow meshes, binary STL and a
//!   CSG script.
//! - [`synth`]: ground-truth renders, marker-framed scenes, augmentation and
//!   datasets.
//! - [`metrics`]: pin errors, mask overlap, detection AP, ROC-AUC and losses.
//! - [`pipeline`]: all of the above on one scene or a whole manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop)]

pub mod bitting;
pub mod geometry;
pub mod metrics;
pub mod model3d;
pub mod pipeline;
pub mod synth;

pub use bitting::{BitMask, BittingCode, DepthChart, KeySpec};
pub use geometry::{ParamStats, PerspectiveParams, Point2, RasterImage};
pub use model3d::{BowSpec, HeightProfile, TriMesh};
