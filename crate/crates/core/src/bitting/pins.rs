//! Keypoints, virtual pins and depth decoding.

use serde::{Deserialize, Serialize};

use super::{BitMask, BittingCode, BittingError, KeySpec, Keypoints};
use crate::geometry::Point2;

/// Locates shoulder and tip on an upright mask (bitting up, blade right).
///
/// The tip is the right-most foreground column, taken at its lowest pixel.
/// The shoulder is the left-most foreground pixel in the bottom quarter of
/// the silhouette, i.e. where the blade baseline starts. Both are returned
/// at the outer (bottom, left/right) pixel corners, so the blade spans
/// `tip.x - shoulder.x` pixels.
pub fn locate_keypoints(mask: &BitMask) -> Result<Keypoints, BittingError> {
    let bbox = mask.bbox().ok_or(BittingError::EmptyMask)?;
    let band_top = bbox.y0 + (3 * bbox.height()) / 4;

    let lowest_in_column = |x: usize, from: usize| (from..=bbox.y1).rev().find(|&y| mask.get(x, y));

    let tip_x = bbox.x1;
    let tip_y = lowest_in_column(tip_x, bbox.y0).expect("bbox column has foreground");

    let (sh_x, _) = (bbox.x0..=bbox.x1)
        .find_map(|x| {
            (band_top..=bbox.y1)
                .find(|&y| mask.get(x, y))
                .map(|y| (x, y))
        })
        .expect("bottom row of the bbox has foreground");
    let sh_y = lowest_in_column(sh_x, band_top).expect("column has foreground in band");

    let kp = Keypoints {
        shoulder: Point2::new(sh_x as f64, sh_y as f64 + 1.0),
        tip: Point2::new(tip_x as f64 + 1.0, tip_y as f64 + 1.0),
    };
    if kp.tip.x - kp.shoulder.x < 2.0 {
        return Err(BittingError::DegenerateBlade);
    }
    Ok(kp)
}

/// Remaining blade height under each pin, as a fraction of the uncut blade
/// height.
///
/// Pin `i` sits at column `shoulder.x + d_i / L * (tip.x - shoulder.x)`. A
/// ray rises from the bottom of that column to the first foreground pixel and
/// on to the first background pixel above it; the material height is measured
/// from the baseline (`shoulder.y`) to that transition. The pixel scale comes
/// from the keypoints, so heights do not depend on mask resolution.
pub fn cast_virtual_pins(mask: &BitMask, spec: &KeySpec) -> Result<Vec<f64>, BittingError> {
    let kp = mask.keypoints.ok_or(BittingError::MissingKeypoints)?;
    let blade_px = kp.tip.x - kp.shoulder.x;
    if !(blade_px > 0.0) {
        return Err(BittingError::DegenerateBlade);
    }
    let px_per_mm = blade_px / spec.blade_length_mm;
    let blade_height_px = spec.blade_height_mm * px_per_mm;
    let baseline = kp.shoulder.y;
    let start_row = (baseline.ceil() as i64 - 1).min(mask.height() as i64 - 1);

    let mut heights = Vec::with_capacity(spec.pin_count());
    for (i, &d) in spec.pin_positions_mm.iter().enumerate() {
        let x = kp.shoulder.x + d / spec.blade_length_mm * blade_px;
        if !(d >= 0.0 && d <= spec.blade_length_mm) || x < 0.0 || x >= mask.width() as f64 {
            return Err(BittingError::OutOfFrame(i));
        }
        let col = x.floor() as usize;
        let mut row = start_row;
        while row >= 0 && !mask.get(col, row as usize) {
            row -= 1;
        }
        if row < 0 {
            return Err(BittingError::RayMiss(i));
        }
        while row >= 0 && mask.get(col, row as usize) {
            row -= 1;
        }
        // `row + 1` is the top foreground pixel; its upper edge is the cut.
        let top_edge = (row + 1) as f64;
        heights.push(((baseline - top_edge) / blade_height_px).clamp(0.0, 1.0));
    }
    Ok(heights)
}

/// Snaps each height to the nearest chart depth; ties go to the shallower cut.
pub fn heights_to_code(heights: &[f64], spec: &KeySpec) -> BittingCode {
    let chart = &spec.depth_chart;
    let depths = heights
        .iter()
        .map(|&h| {
            let h_mm = h * spec.blade_height_mm;
            let mut best = 0u8;
            let mut best_err = f64::INFINITY;
            for k in 0..chart.num_depths {
                let err = (h_mm - chart.height_mm(k)).abs();
                if err < best_err - 1e-9 {
                    best = k;
                    best_err = err;
                }
            }
            best
        })
        .collect();
    BittingCode::new(depths)
}

/// Keypoints (located if absent), pin heights and the snapped code.
pub fn decode_mask(
    mask: &BitMask,
    spec: &KeySpec,
) -> Result<(BittingCode, Vec<f64>), BittingError> {
    let heights = if mask.keypoints.is_some() {
        cast_virtual_pins(mask, spec)?
    } else {
        let mut m = mask.clone();
        m.keypoints = Some(locate_keypoints(mask)?);
        cast_virtual_pins(&m, spec)?
    };
    Ok((heights_to_code(&heights, spec), heights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacsViolation {
    /// Index of the left pin of the offending pair.
    pub pair: usize,
    pub delta: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MacsReport {
    pub violations: Vec<MacsViolation>,
}

impl MacsReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_macs(code: &BittingCode, spec: &KeySpec) -> Result<MacsReport, BittingError> {
    if code.len() != spec.pin_count() {
        return Err(BittingError::LengthMismatch {
            expected: spec.pin_count(),
            got: code.len(),
        });
    }
    let violations = code
        .depths
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let delta = w[0].abs_diff(w[1]);
            (delta > spec.macs).then_some(MacsViolation { pair: i, delta })
        })
        .collect();
    Ok(MacsReport { violations })
}
