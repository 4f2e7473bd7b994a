use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::bitting::{cast_virtual_pins, locate_keypoints, BitMask, KeySpec};

fn heights(mask: &BitMask, spec: &KeySpec) -> Result<Vec<f64>, MetricsError> {
    if mask.keypoints.is_some() {
        return Ok(cast_virtual_pins(mask, spec)?);
    }
    let mut m = mask.clone();
    m.keypoints = Some(locate_keypoints(mask)?);
    Ok(cast_virtual_pins(&m, spec)?)
}

/// Per-pin `|h_pred - h_gt|` in blade-height fractions. Masks without
/// keypoints get them located.
pub fn pin_errors(pred: &BitMask, gt: &BitMask, spec: &KeySpec) -> Result<Vec<f64>, MetricsError> {
    let (p, g) = (heights(pred, spec)?, heights(gt, spec)?);
    Ok(p.iter().zip(&g).map(|(a, b)| (a - b).abs()).collect())
}

/// Max pin height error (MPE).
pub fn max_pin_error(pred: &BitMask, gt: &BitMask, spec: &KeySpec) -> Result<f64, MetricsError> {
    Ok(pin_errors(pred, gt, spec)?.into_iter().fold(0.0, f64::max))
}

pub fn mean_pin_error(pred: &BitMask, gt: &BitMask, spec: &KeySpec) -> Result<f64, MetricsError> {
    let e = pin_errors(pred, gt, spec)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Intersection over the predicted area.
    Paper,
    /// Intersection over union.
    Iou,
}

pub fn pixel_overlap(pred: &BitMask, gt: &BitMask, mode: OverlapMode) -> Result<f64, MetricsError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(MetricsError::DimensionMismatch);
    }
    let (mut inter, mut union, mut area) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
        area += p as usize;
    }
    let denom = match mode {
        OverlapMode::Paper => area,
        OverlapMode::Iou => union,
    };
    if denom == 0 {
        return Err(MetricsError::EmptyPrediction);
    }
    Ok(inter as f64 / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitting::DepthChart;

    fn spec() -> KeySpec {
        KeySpec {
            blade_length_mm: 100.0,
            blade_height_mm: 100.0,
            pin_positions_mm: vec![10.0, 30.0, 50.0, 70.0, 90.0],
            depth_chart: DepthChart {
                num_depths: 10,
                shallowest_mm: 95.0,
                increment_mm: 5.0,
            },
            ..KeySpec::default()
        }
    }

    /// 100 px long, 100 px tall blade at 1 px/mm; `notch` lowers pin 2's column.
    fn blade(notch: usize) -> BitMask {
        BitMask::from_fn(120, 120, |x, y| {
            let top = if x == 60 { 10 + notch } else { 10 };
            (10..110).contains(&x) && (top..110).contains(&y)
        })
    }

    #[test]
    fn identical_masks_have_zero_error() {
        let m = blade(0);
        assert_eq!(max_pin_error(&m, &m, &spec()).unwrap(), 0.0);
        assert_eq!(mean_pin_error(&m, &m, &spec()).unwrap(), 0.0);
    }

    #[test]
    fn three_pixel_displacement() {
        let mpe = max_pin_error(&blade(3), &blade(0), &spec()).unwrap();
        assert!((mpe - 0.03).abs() < 1e-12, "{mpe}");
        let mean = mean_pin_error(&blade(3), &blade(0), &spec()).unwrap();
        assert!((mean - 0.006).abs() < 1e-12);
    }

    #[test]
    fn overlap_modes() {
        let a = BitMask::from_fn(8, 4, |x, _| x < 4);
        let b = BitMask::from_fn(8, 4, |x, _| (2..6).contains(&x));
        assert_eq!(pixel_overlap(&a, &b, OverlapMode::Paper).unwrap(), 0.5);
        assert_eq!(pixel_overlap(&a, &b, OverlapMode::Iou).unwrap(), 1.0 / 3.0);
        assert_eq!(pixel_overlap(&a, &a, OverlapMode::Iou).unwrap(), 1.0);
        let c = BitMask::from_fn(8, 4, |x, _| x >= 6);
        assert_eq!(pixel_overlap(&a, &c, OverlapMode::Paper).unwrap(), 0.0);
        assert_eq!(pixel_overlap(&a, &c, OverlapMode::Iou).unwrap(), 0.0);
        assert_eq!(
            pixel_overlap(&BitMask::new(8, 4), &a, OverlapMode::Paper),
            Err(MetricsError::EmptyPrediction)
        );
        assert_eq!(
            pixel_overlap(&BitMask::new(3, 4), &a, OverlapMode::Iou),
            Err(MetricsError::DimensionMismatch)
        );
    }
}
