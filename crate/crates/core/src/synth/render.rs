use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::bitting::{
    edge_height_mm, validate_macs, BitMask, BittingCode, CutGeometry, KeySpec, Keypoints,
};
use crate::geometry::Point2;

/// Silhouette parameters beyond the key spec, in mm.
///
/// The bow is drawn as a plain rectangle left of the shoulder. It starts
/// above the lower quarter of the silhouette and rises higher than the
/// blade, which keeps the baseline band clear for shoulder detection and
/// lets the bow identify the blade direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub cut: CutGeometry,
    pub bow_length_mm: f64,
    pub bow_bottom_mm: f64,
    pub bow_top_mm: f64,
}

impl RenderStyle {
    pub fn for_spec(spec: &KeySpec) -> Self {
        Self {
            cut: CutGeometry::default(),
            bow_length_mm: 0.2 * spec.blade_length_mm,
            bow_bottom_mm: 0.4 * spec.blade_height_mm,
            bow_top_mm: 1.4 * spec.blade_height_mm,
        }
    }

    /// Width and height of the whole silhouette.
    pub fn extent_mm(&self, spec: &KeySpec) -> (f64, f64) {
        (
            self.bow_length_mm + spec.blade_length_mm,
            self.bow_top_mm.max(spec.blade_height_mm),
        )
    }
}

/// Uniformly random code obeying the MACS rule: each depth is drawn from
/// the depths reachable from its left neighbour.
pub fn random_code<R: Rng + ?Sized>(spec: &KeySpec, rng: &mut R) -> BittingCode {
    let deepest = spec.depth_chart.deepest() as u16;
    let macs = spec.macs as u16;
    let mut depths = Vec::with_capacity(spec.pin_count());
    let mut prev: Option<u16> = None;
    for _ in 0..spec.pin_count() {
        let (lo, hi) = match prev {
            Some(p) => (p.saturating_sub(macs), (p + macs).min(deepest)),
            None => (0, deepest),
        };
        let d = rng.random_range(lo..=hi);
        depths.push(d as u8);
        prev = Some(d);
    }
    BittingCode::new(depths)
}

fn check_code(code: &BittingCode, spec: &KeySpec) -> Result<(), SynthError> {
    code.check_shape(spec)
        .map_err(|e| SynthError::InvalidCode(e.to_string()))?;
    let report = validate_macs(code, spec).map_err(|e| SynthError::InvalidCode(e.to_string()))?;
    if !report.is_valid() {
        return Err(SynthError::MacsViolation(report));
    }
    Ok(())
}

/// Point-samples the silhouette at pixel centres. `shoulder` is the
/// shoulder position in pixel-corner coordinates.
fn rasterize(
    code: &BittingCode,
    spec: &KeySpec,
    style: &RenderStyle,
    px_per_mm: f64,
    shoulder: Point2,
    width: usize,
    height: usize,
) -> BitMask {
    let length = spec.blade_length_mm;
    // Per column: vertical interval of foreground in mm above the baseline.
    let spans: Vec<Option<(f64, f64)>> = (0..width)
        .map(|c| {
            let x = (c as f64 + 0.5 - shoulder.x) / px_per_mm;
            if (0.0..=length).contains(&x) {
                Some((0.0, edge_height_mm(code, spec, &style.cut, x)))
            } else if x < 0.0 && x >= -style.bow_length_mm {
                Some((style.bow_bottom_mm, style.bow_top_mm))
            } else {
                None
            }
        })
        .collect();
    let mask = BitMask::from_fn(width, height, |c, r| {
        spans[c].is_some_and(|(lo, hi)| {
            let y = (shoulder.y - r as f64 - 0.5) / px_per_mm;
            y >= lo && y <= hi
        })
    });
    mask.with_keypoints(Keypoints {
        shoulder,
        tip: Point2::new(shoulder.x + length * px_per_mm, shoulder.y),
    })
}

/// Upright key silhouette (bitting up, blade right) with a 4 px margin and
/// exact keypoints.
pub fn render_key_mask(
    code: &BittingCode,
    spec: &KeySpec,
    px_per_mm: f64,
) -> Result<BitMask, SynthError> {
    render_key_mask_with(code, spec, &RenderStyle::for_spec(spec), px_per_mm)
}

pub fn render_key_mask_with(
    code: &BittingCode,
    spec: &KeySpec,
    style: &RenderStyle,
    px_per_mm: f64,
) -> Result<BitMask, SynthError> {
    if !(px_per_mm > 0.0 && px_per_mm.is_finite()) {
        return Err(SynthError::InvalidOptions(format!(
            "px_per_mm = {px_per_mm}"
        )));
    }
    check_code(code, spec)?;
    let margin = 4.0;
    let (ew, eh) = style.extent_mm(spec);
    let width = (ew * px_per_mm).ceil() as usize + 8;
    let height = (eh * px_per_mm).ceil() as usize + 8;
    let shoulder = Point2::new(
        margin + style.bow_length_mm * px_per_mm,
        margin + eh * px_per_mm,
    );
    Ok(rasterize(
        code, spec, style, px_per_mm, shoulder, width, height,
    ))
}

/// Scale at which the silhouette's longer side covers 90% of a square patch.
pub fn patch_px_per_mm(spec: &KeySpec, style: &RenderStyle, patch_size: usize) -> f64 {
    let (ew, eh) = style.extent_mm(spec);
    0.9 * patch_size as f64 / ew.max(eh)
}

/// Silhouette centred in a `patch_size` square, the canonical rectified view.
pub fn render_patch_mask(
    code: &BittingCode,
    spec: &KeySpec,
    patch_size: usize,
) -> Result<BitMask, SynthError> {
    render_patch_mask_with(code, spec, &RenderStyle::for_spec(spec), patch_size)
}

pub fn render_patch_mask_with(
    code: &BittingCode,
    spec: &KeySpec,
    style: &RenderStyle,
    patch_size: usize,
) -> Result<BitMask, SynthError> {
    if patch_size < 8 {
        return Err(SynthError::InvalidOptions(format!(
            "patch_size = {patch_size}"
        )));
    }
    check_code(code, spec)?;
    let ppm = patch_px_per_mm(spec, style, patch_size);
    let (ew, eh) = style.extent_mm(spec);
    let half = 0.5 * patch_size as f64;
    let shoulder = Point2::new(
        half - 0.5 * ew * ppm + style.bow_length_mm * ppm,
        half + 0.5 * eh * ppm,
    );
    Ok(rasterize(
        code, spec, style, ppm, shoulder, patch_size, patch_size,
    ))
}
