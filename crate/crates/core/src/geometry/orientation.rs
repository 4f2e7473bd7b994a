//! Classical orientation cues for a rectified key silhouette.

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::bitting::BitMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Bitting faces up.
    Upright,
    /// Bitting faces down; mirror rows to correct.
    Flipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEstimate {
    pub orientation: Orientation,
    /// In `[0.5, 1]`; below 0.6 both orientations are worth trying.
    pub confidence: f64,
}

/// Decides which long edge carries the bitting.
///
/// Over the central 60% of the silhouette's columns (away from bow and tip)
/// the rougher edge, measured by the variance of its row position, is taken
/// as the bitting. Equal variance reports upright at confidence 0.5.
pub fn detect_flip_heuristic(mask: &BitMask) -> Result<FlipEstimate, GeometryError> {
    let bbox = mask.bbox().ok_or(GeometryError::EmptyMask)?;
    let w = bbox.width();
    let (c0, c1) = if w >= 5 {
        (bbox.x0 + w / 5, bbox.x0 + (4 * w) / 5)
    } else {
        (bbox.x0, bbox.x1 + 1)
    };
    let mut tops = Vec::with_capacity(c1 - c0);
    let mut bottoms = Vec::with_capacity(c1 - c0);
    for x in c0..c1 {
        let mut first = None;
        let mut last = None;
        for y in bbox.y0..=bbox.y1 {
            if mask.get(x, y) {
                first.get_or_insert(y);
                last = Some(y);
            }
        }
        if let (Some(t), Some(b)) = (first, last) {
            tops.push(t as f64);
            bottoms.push(b as f64);
        }
    }
    let var_top = variance(&tops);
    let var_bottom = variance(&bottoms);
    let total = var_top + var_bottom;
    if total <= 0.0 || (var_top - var_bottom).abs() <= 1e-12 * total {
        return Ok(FlipEstimate {
            orientation: Orientation::Upright,
            confidence: 0.5,
        });
    }
    Ok(if var_top > var_bottom {
        FlipEstimate {
            orientation: Orientation::Upright,
            confidence: var_top / total,
        }
    } else {
        FlipEstimate {
            orientation: Orientation::Flipped,
            confidence: var_bottom / total,
        }
    })
}

fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BladeDirection {
    Right,
    Left,
}

/// Which way the blade points, from where the bow sits.
///
/// The bow stands taller than the blade, so the top tenth of the silhouette
/// belongs to it. The returned score is the horizontal position of that band
/// within the bounding box: near 0 for a bow on the left (blade pointing
/// right), near 1 for a mirrored key.
pub fn detect_blade_direction(mask: &BitMask) -> Result<(BladeDirection, f64), GeometryError> {
    let bbox = mask.bbox().ok_or(GeometryError::EmptyMask)?;
    let band = (bbox.height() / 10).max(1);
    let (mut sum, mut n) = (0.0, 0usize);
    for y in bbox.y0..bbox.y0 + band {
        for x in bbox.x0..=bbox.x1 {
            if mask.get(x, y) {
                sum += x as f64 + 0.5;
                n += 1;
            }
        }
    }
    let cx = sum / n as f64;
    let score = ((cx - bbox.x0 as f64) / bbox.width() as f64).clamp(0.0, 1.0);
    let dir = if score > 0.5 {
        BladeDirection::Left
    } else {
        BladeDirection::Right
    };
    Ok((dir, score))
}
