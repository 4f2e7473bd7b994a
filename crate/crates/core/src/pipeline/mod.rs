//! End-to-end runs: detect, rectify, segment, decode, check MACS and build
//! the printable model, plus whole-manifest evaluation.

mod config;
mod eval;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::SynthError;

pub use config::{DetectorKind, PipelineConfig, SegmenterKind};
pub use eval::{eval_dataset, AggregateReport, Arrangement, EvalReport};
pub use run::{patch_box_in_scene, run_pipeline, Artifacts, Failure, KeyReport, SceneInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Warp,
    Segment,
    Decode,
    Macs,
    Mesh,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Detect,
        Stage::Warp,
        Stage::Segment,
        Stage::Decode,
        Stage::Macs,
        Stage::Mesh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Detect => "detect",
            Stage::Warp => "warp",
            Stage::Segment => "segment",
            Stage::Decode => "decode",
            Stage::Macs => "macs",
            Stage::Mesh => "mesh",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Dataset(#[from] SynthError),
}

impl PipelineError {
    pub fn at(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: message.to_string(),
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
