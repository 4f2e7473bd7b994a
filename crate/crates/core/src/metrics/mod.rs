//! Evaluation quantities: pin errors, mask overlap, detection AP, ROC-AUC
//! and the training loss formulas.

mod detection;
mod losses;
mod pins;
mod roc;

pub use detection::{average_precision, box_iou, BoxF, Detection, PRCurve};
pub use losses::{
    loss_classification, loss_mse_normalized, loss_pixel_bce, loss_smooth_l1, ClassificationLoss,
};
pub use pins::{max_pin_error, mean_pin_error, pin_errors, pixel_overlap, OverlapMode};
pub use roc::roc_auc;

use thiserror::Error;

use crate::bitting::BittingError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("inputs have different dimensions")]
    DimensionMismatch,
    #[error("prediction is empty")]
    EmptyPrediction,
    #[error("no ground truth boxes")]
    NoGroundTruth,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Bitting(#[from] BittingError),
}
