use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bitting::KeySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmenterKind {
    /// Global threshold on the rectified patch.
    Threshold,
    /// A precomputed mask supplied with the scene.
    MaskFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Key box, homography and flip flag from the scene annotation.
    Annotation,
    /// Homography from the four marker corners; flip decided from the mask.
    MarkerBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Key spec JSON; the built-in spec when absent.
    pub keyspec: Option<PathBuf>,
    pub segmenter: SegmenterKind,
    pub detector: DetectorKind,
    /// Side of the rectified patch in pixels.
    pub patch_size: usize,
    /// Grid on which mask overlap is measured.
    pub mask_size: usize,
    pub mpe_gate: f64,
    pub stations: usize,
    pub ring: usize,
    pub iou_threshold: f64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            keyspec: None,
            segmenter: SegmenterKind::Threshold,
            detector: DetectorKind::Annotation,
            patch_size: 128,
            mask_size: 56,
            mpe_gate: 0.012,
            stations: 256,
            ring: 128,
            iou_threshold: 0.5,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        if self.patch_size < 64 {
            return bad("patch_size must be at least 64");
        }
        if self.mask_size == 0 {
            return bad("mask_size must be positive");
        }
        if !(self.mpe_gate > 0.0) {
            return bad("mpe_gate must be positive");
        }
        if self.stations < 2 || self.ring < 8 {
            return bad("need stations >= 2 and ring >= 8");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return bad("iou_threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let cfg: Self =
            serde_json::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn load_keyspec(&self) -> Result<KeySpec, PipelineError> {
        match &self.keyspec {
            Some(p) => KeySpec::load(p).map_err(|e| PipelineError::Config(e.to_string())),
            None => Ok(KeySpec::default()),
        }
    }
}
