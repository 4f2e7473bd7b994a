use serde::{Deserialize, Serialize};

use super::{sweep_rings, ModelError, TriMesh};
use crate::bitting::KeySpec;
use crate::geometry::{polygon, Point2};

/// Key bow: a flat plate in the keyway plane, extruded along the blade axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowSpec {
    /// Outline in mm; recentred on the keyway's bounding box when attached.
    pub outline: Vec<Point2>,
    pub thickness_mm: f64,
    /// How far the plate reaches over the blade, past the shoulder.
    pub overlap_mm: f64,
}

impl Default for BowSpec {
    fn default() -> Self {
        Self {
            outline: rounded_rect(20.0, 20.0, 3.0, 8),
            thickness_mm: 2.5,
            overlap_mm: 1.0,
        }
    }
}

/// Counter-clockwise `w x h` rectangle centred on the origin with corner
/// arcs of radius `r`, each split into `segments` pieces.
pub fn rounded_rect(w: f64, h: f64, r: f64, segments: usize) -> Vec<Point2> {
    let r = r.clamp(0.0, 0.5 * w.min(h));
    let (hx, hy) = (0.5 * w - r, 0.5 * h - r);
    if r == 0.0 || segments == 0 {
        return vec![
            Point2::new(-0.5 * w, -0.5 * h),
            Point2::new(0.5 * w, -0.5 * h),
            Point2::new(0.5 * w, 0.5 * h),
            Point2::new(-0.5 * w, 0.5 * h),
        ];
    }
    let centres = [(hx, -hy), (hx, hy), (-hx, hy), (-hx, -hy)];
    let mut out = Vec::with_capacity(4 * (segments + 1));
    for (q, &(cx, cy)) in centres.iter().enumerate() {
        let start = -std::f64::consts::FRAC_PI_2 + q as f64 * std::f64::consts::FRAC_PI_2;
        for s in 0..=segments {
            let a = start + std::f64::consts::FRAC_PI_2 * s as f64 / segments as f64;
            out.push(Point2::new(cx + r * a.cos(), cy + r * a.sin()));
        }
    }
    out.dedup_by(|a, b| a.dist(*b) < 1e-12);
    out
}

impl BowSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.outline.len() < 3 || !polygon::is_simple(&self.outline) {
            return Err(ModelError::InvalidBow(
                "outline is not a simple polygon".into(),
            ));
        }
        if polygon::signed_area(&self.outline).abs() <= 0.0 {
            return Err(ModelError::InvalidBow("outline has zero area".into()));
        }
        if !(self.thickness_mm > 0.0) {
            return Err(ModelError::InvalidBow("thickness must be positive".into()));
        }
        Ok(())
    }

    /// Counter-clockwise outline moved so its bounding-box centre sits on
    /// the keyway's.
    pub fn placed_outline(&self, spec: &KeySpec) -> Vec<Point2> {
        let (kc, oc) = (bbox_centre(&spec.keyway), bbox_centre(&self.outline));
        let mut out: Vec<Point2> = self
            .outline
            .iter()
            .map(|p| Point2::new(p.x - oc.x + kc.x, p.y - oc.y + kc.y))
            .collect();
        if polygon::signed_area(&out) < 0.0 {
            out.reverse();
        }
        out
    }

    /// `x` extent of the bow plate.
    pub fn x_range(&self) -> (f64, f64) {
        (self.overlap_mm - self.thickness_mm, self.overlap_mm)
    }
}

fn bbox_centre(pts: &[Point2]) -> Point2 {
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
}

/// Adds the bow as a second closed shell overlapping the blade base.
///
/// The plate spans `x` in `[overlap - thickness, overlap]`. The overlap must
/// be positive, must not exceed the blade's extent, and the outline must
/// cover the whole keyway section, otherwise the parts would not fuse.
pub fn attach_bow(blade: &TriMesh, bow: &BowSpec, spec: &KeySpec) -> Result<TriMesh, ModelError> {
    if blade.is_empty() {
        return Err(ModelError::EmptyMesh);
    }
    bow.validate()?;
    if !(bow.overlap_mm > 0.0) {
        return Err(ModelError::NoOverlap);
    }
    let (bx0, bx1) = blade
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v[0]), hi.max(v[0]))
        });
    if bx0 > 0.0 || bx1 < bow.overlap_mm {
        return Err(ModelError::NoOverlap);
    }
    let outline = bow.placed_outline(spec);
    if spec.keyway.iter().any(|&p| !polygon::contains(&outline, p)) {
        return Err(ModelError::NoOverlap);
    }
    let (x0, x1) = bow.x_range();
    let plate = sweep_rings(&[(x0, outline.clone()), (x1, outline)])?;
    let mut out = blade.clone();
    out.merge(&plate);
    Ok(out)
}
