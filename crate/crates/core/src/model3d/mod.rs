//! Printable key models: bitting height profile, swept blade, bow shell,
//! binary STL and an equivalent CSG script.
//!
//! Model coordinates are millimetres with `x` along the blade (shoulder at
//! 0), `y` the keyway `u` axis and `z` the keyway `v` axis (bitting up).

mod blade;
mod bow;
mod csg;
mod mesh;
mod profile;
mod stl;

pub use blade::{build_blade_mesh, sweep_rings, BladeOptions};
pub use bow::{attach_bow, rounded_rect, BowSpec};
pub use csg::{emit_csg_script, render_csg_script};
pub use mesh::{mesh_diagnostics, MeshDiagnostics, TriMesh};
pub use profile::{bitting_height_profile, HeightProfile};
pub use stl::{read_stl, stl_from_bytes, stl_to_bytes, write_stl, STL_HEADER};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("blade is degenerate (shoulder and tip share a column)")]
    DegenerateBlade,
    #[error("boundary has no points")]
    EmptyBoundary,
    #[error("invalid height profile: {0}")]
    InvalidProfile(String),
    #[error("keyway clip at x = {x_mm:.3} mm is not a single simple polygon")]
    ClipNotSimple { x_mm: f64 },
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("cross-section at x = {x_mm:.3} mm could not be triangulated")]
    Triangulation { x_mm: f64 },
    #[error("bow does not overlap the blade")]
    NoOverlap,
    #[error("invalid bow: {0}")]
    InvalidBow(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("io: {0}")]
    IoFailure(String),
    #[error("malformed STL: {0}")]
    MalformedStl(String),
}
