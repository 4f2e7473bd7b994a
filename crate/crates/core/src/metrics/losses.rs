use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::bitting::BitMask;
use crate::geometry::{ParamStats, PerspectiveParams};

/// Mean smooth L1: `0.5 d^2` for `|d| < 1`, else `|d| - 0.5`.
pub fn loss_smooth_l1(pred: &[f64], target: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != target.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::InvalidArgument("empty input".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = (p - t).abs();
            if d < 1.0 {
                0.5 * d * d
            } else {
                d - 0.5
            }
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Mean squared error of the eight parameters in units of their spread.
pub fn loss_mse_normalized(
    pred: &PerspectiveParams,
    target: &PerspectiveParams,
    stats: &ParamStats,
) -> f64 {
    (0..8)
        .map(|i| {
            let d = (pred.theta[i] - target.theta[i]) / stats.std[i];
            d * d
        })
        .sum::<f64>()
        / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationLoss {
    /// Cross entropy of the softmax over all logits.
    SoftmaxCe,
    /// Mean one-vs-all sigmoid cross entropy.
    LogLoss,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn loss_classification(
    logits: &[f64],
    label: usize,
    kind: ClassificationLoss,
) -> Result<f64, MetricsError> {
    if label >= logits.len() {
        return Err(MetricsError::InvalidArgument(format!(
            "label {label} with {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(MetricsError::InvalidArgument("non-finite logit".into()));
    }
    Ok(match kind {
        ClassificationLoss::SoftmaxCe => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            lse - logits[label]
        }
        ClassificationLoss::LogLoss => {
            logits
                .iter()
                .enumerate()
                .map(|(i, &z)| softplus(z) - if i == label { z } else { 0.0 })
                .sum::<f64>()
                / logits.len() as f64
        }
    })
}

/// Mean per-pixel sigmoid cross entropy of row-major logits against `gt`.
pub fn loss_pixel_bce(logits: &[f64], gt: &BitMask) -> Result<f64, MetricsError> {
    if logits.len() != gt.width() * gt.height() || logits.is_empty() {
        return Err(MetricsError::DimensionMismatch);
    }
    let sum: f64 = logits
        .iter()
        .zip(gt.bits())
        .map(|(&z, &y)| softplus(z) - if y { z } else { 0.0 })
        .sum();
    Ok(sum / logits.len() as f64)
}
