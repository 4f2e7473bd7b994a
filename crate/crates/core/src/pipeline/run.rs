use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectorKind, PipelineConfig, PipelineError, SegmenterKind, Stage};
use crate::bitting::{
    cast_virtual_pins, extract_boundary, fill_holes, heights_to_code, largest_component,
    locate_keypoints, segment_threshold_with, validate_macs, BitMask, BittingCode, KeySpec,
    SegmentOptions,
};
use crate::geometry::{
    detect_blade_direction, detect_flip_heuristic, flip_horizontal, flip_vertical,
    homography_from_correspondences, warp_image, BladeDirection, Orientation, PerspectiveParams,
    Point2, RasterImage,
};
use crate::metrics::{pin_errors, pixel_overlap, BoxF, Detection, OverlapMode};
use crate::model3d::{
    attach_bow, bitting_height_profile, build_blade_mesh, mesh_diagnostics, write_stl, BowSpec,
    MeshDiagnostics,
};
use crate::synth::{
    canonical_frame_corners, mask_box_in_scene, render_patch_mask, SceneAnnotation,
};

/// Everything the pipeline may use about one scene.
#[derive(Debug, Clone, Default)]
pub struct SceneInput {
    pub id: String,
    pub image: Option<RasterImage>,
    /// Needed by the annotation detector; its code is used as ground truth.
    pub annotation: Option<SceneAnnotation>,
    /// Marker corners in canonical order; falls back to the annotation's.
    pub corners: Option<[Point2; 4]>,
    /// Mask in the rectified (not yet oriented) patch, for the mask-file segmenter.
    pub mask: Option<BitMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

/// Paths relative to the output root.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Artifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stl: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyReport {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    /// Decoded code, hyphenated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_code: Option<String>,
    pub heights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_pin_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macs_valid: Option<bool>,
    /// Blade-direction score of the rectified mask: near 1 when mirrored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_score: Option<f64>,
    pub flipped_horizontal: bool,
    pub flipped_vertical: bool,
    /// Share of boundary steps that keep their direction; a smoothness proxy
    /// for segmentation confidence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<Detection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshDiagnostics>,
    pub artifacts: Artifacts,
    /// Completed every stage, MACS holds, and MPE is within the gate when
    /// ground truth is known.
    pub pass: bool,
}

impl KeyReport {
    fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            failure: None,
            code: None,
            gt_code: None,
            heights: Vec::new(),
            mpe: None,
            mean_pin_error: None,
            overlap: None,
            iou: None,
            macs_valid: None,
            flip_score: None,
            flipped_horizontal: false,
            flipped_vertical: false,
            confidence: None,
            detection: None,
            mesh: None,
            artifacts: Artifacts::default(),
            pass: false,
        }
    }

    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    /// Decoded code equals the ground truth.
    pub fn exact(&self) -> bool {
        self.code.is_some() && self.code == self.gt_code
    }
}

/// Runs every stage on one scene, writing artifacts under
/// `config.out_dir/<id>/`. Stops at the first failing stage, which is
/// recorded in the report; no STL is written for a failed or MACS-invalid key.
pub fn run_pipeline(input: &SceneInput, spec: &KeySpec, config: &PipelineConfig) -> KeyReport {
    let mut report = KeyReport::new(&input.id);
    if let Some(gt) = input.annotation.as_ref() {
        report.gt_code = Some(gt.code.to_string());
    }
    if let Err(e) = run_stages(input, spec, config, &mut report) {
        report.failure = Some(Failure {
            stage: e.stage().unwrap_or(Stage::Detect),
            message: e.to_string(),
        });
        report.pass = false;
    }
    report
}

fn io_err(stage: Stage, path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::at(stage, format!("{}: {e}", path.display()))
}

fn run_stages(
    input: &SceneInput,
    spec: &KeySpec,
    config: &PipelineConfig,
    report: &mut KeyReport,
) -> Result<(), PipelineError> {
    let p = config.patch_size;
    let scene_dir = config.out_dir.join(&input.id);
    let rel = |name: &str| format!("{}/{name}", input.id);

    // 1. Detect: key box, scene-to-patch homography, optional flip flag.
    let (theta, flip_hint) = match config.detector {
        DetectorKind::Annotation => {
            let ann = input
                .annotation
                .as_ref()
                .ok_or_else(|| PipelineError::at(Stage::Detect, "no annotation"))?;
            let k = p as f64 / ann.patch_size as f64;
            let theta = PerspectiveParams::scale(k, k)
                .compose(&ann.theta)
                .map_err(|e| PipelineError::at(Stage::Detect, e))?;
            (theta, Some(ann.flip))
        }
        DetectorKind::MarkerBox => {
            let corners = input
                .corners
                .or_else(|| input.annotation.as_ref().and_then(|a| a.corners))
                .ok_or_else(|| PipelineError::at(Stage::Detect, "no marker corners"))?;
            let theta = homography_from_correspondences(&corners, &canonical_frame_corners(p))
                .map_err(|e| PipelineError::at(Stage::Detect, e))?;
            (theta, None)
        }
    };
    let inv = theta
        .inverse()
        .map_err(|e| PipelineError::at(Stage::Detect, e))?;

    // 2. Warp to the rectified patch.
    let image = input
        .image
        .as_ref()
        .ok_or_else(|| PipelineError::at(Stage::Warp, "no scene image"))?;
    let patch = warp_image(image, &theta, p, p).map_err(|e| PipelineError::at(Stage::Warp, e))?;
    fs::create_dir_all(&scene_dir).map_err(|e| io_err(Stage::Warp, &scene_dir, e))?;
    patch
        .save_png(&scene_dir.join("patch.png"))
        .map_err(|e| PipelineError::at(Stage::Warp, e))?;
    report.artifacts.patch = Some(rel("patch.png"));

    // 3. Segment, then orient.
    let (raw, score) = match config.segmenter {
        SegmenterKind::Threshold => {
            let s = segment_threshold_with(&patch, &SegmentOptions::default())
                .map_err(|e| PipelineError::at(Stage::Segment, e))?;
            (s.mask, s.separability)
        }
        SegmenterKind::MaskFile => {
            let m = input
                .mask
                .as_ref()
                .ok_or_else(|| PipelineError::at(Stage::Segment, "no mask supplied"))?;
            let m = if m.width() == p && m.height() == p {
                m.clone()
            } else {
                m.resize_nearest(p, p)
            };
            let m = largest_component(&m)
                .ok_or_else(|| PipelineError::at(Stage::Segment, "mask is empty"))?;
            (fill_holes(&m), 1.0)
        }
    };
    if let Some(b) = mask_box_in_scene(&raw, &inv) {
        report.detection = Some(Detection {
            image_id: input.id.clone(),
            bbox: b,
            score,
        });
    }
    let (dir, flip_score) =
        detect_blade_direction(&raw).map_err(|e| PipelineError::at(Stage::Segment, e))?;
    report.flip_score = Some(flip_score);
    let mirror = flip_hint.unwrap_or(dir == BladeDirection::Left);
    report.flipped_horizontal = mirror;
    let mut mask = if mirror { raw.flip_horizontal() } else { raw };
    let patch = if mirror {
        flip_horizontal(&patch)
    } else {
        patch
    };

    // 4. Keypoints and virtual pins; a weak flip estimate tries both ways up.
    let est = detect_flip_heuristic(&mask).map_err(|e| PipelineError::at(Stage::Segment, e))?;
    let first = est.orientation == Orientation::Flipped;
    let tries: &[bool] = if est.confidence < 0.6 {
        &[first, !first]
    } else {
        &[first]
    };
    let mut decoded = None;
    let mut last_err = None;
    for &vflip in tries {
        let candidate = if vflip {
            mask.flip_vertical()
        } else {
            mask.clone()
        };
        match decode(&candidate, spec) {
            Ok((kp_mask, heights, code)) => {
                let macs_ok = validate_macs(&code, spec).is_ok_and(|r| r.is_valid());
                let better = decoded.is_none() || macs_ok;
                if better {
                    decoded = Some((vflip, kp_mask, heights, code, macs_ok));
                }
                if macs_ok {
                    break;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (vflip, kp_mask, heights, code, _) = decoded.ok_or_else(|| {
        last_err.unwrap_or_else(|| PipelineError::at(Stage::Decode, "no orientation decoded"))
    })?;
    report.flipped_vertical = vflip;
    mask = kp_mask;
    let patch = if vflip { flip_vertical(&patch) } else { patch };
    patch
        .save_png(&scene_dir.join("patch.png"))
        .map_err(|e| PipelineError::at(Stage::Warp, e))?;
    mask.save_png(&scene_dir.join("mask.png"))
        .map_err(|e| PipelineError::at(Stage::Segment, e))?;
    report.artifacts.mask = Some(rel("mask.png"));
    report.heights = heights;
    report.code = Some(code.to_string());

    if let Some(ann) = &input.annotation {
        score_against_truth(&mask, &ann.code, spec, config, report)?;
    }

    // 5. MACS.
    let macs = validate_macs(&code, spec).map_err(|e| PipelineError::at(Stage::Macs, e))?;
    report.macs_valid = Some(macs.is_valid());
    if !macs.is_valid() {
        return Err(PipelineError::at(
            Stage::Macs,
            format!("violations {:?}", macs.violations),
        ));
    }

    // 6. Model.
    let boundary = extract_boundary(&mask).map_err(|e| PipelineError::at(Stage::Mesh, e))?;
    report.confidence = Some(smoothness(&boundary));
    let kp = mask.keypoints.expect("decoded mask has keypoints");
    let profile = bitting_height_profile(&boundary, &kp, spec, config.stations)
        .map_err(|e| PipelineError::at(Stage::Mesh, e))?;
    let profile_path = scene_dir.join("profile.csv");
    fs::write(&profile_path, profile.to_csv())
        .map_err(|e| io_err(Stage::Mesh, &profile_path, e))?;
    report.artifacts.profile = Some(rel("profile.csv"));
    let blade = build_blade_mesh(spec, &profile, config.stations, config.ring)
        .map_err(|e| PipelineError::at(Stage::Mesh, e))?;
    let key = attach_bow(&blade, &BowSpec::default(), spec)
        .map_err(|e| PipelineError::at(Stage::Mesh, e))?;
    let diag = mesh_diagnostics(&key);
    write_stl(&key, &scene_dir.join("key.stl")).map_err(|e| PipelineError::at(Stage::Mesh, e))?;
    report.artifacts.stl = Some(rel("key.stl"));
    report.mesh = Some(diag);

    report.pass = report.mpe.is_none_or(|m| m <= config.mpe_gate);
    Ok(())
}

fn decode(
    mask: &BitMask,
    spec: &KeySpec,
) -> Result<(BitMask, Vec<f64>, BittingCode), PipelineError> {
    let kp = locate_keypoints(mask).map_err(|e| PipelineError::at(Stage::Decode, e))?;
    let m = mask.clone().with_keypoints(kp);
    let heights = cast_virtual_pins(&m, spec).map_err(|e| PipelineError::at(Stage::Decode, e))?;
    let code = heights_to_code(&heights, spec);
    Ok((m, heights, code))
}

fn score_against_truth(
    mask: &BitMask,
    gt_code: &BittingCode,
    spec: &KeySpec,
    config: &PipelineConfig,
    report: &mut KeyReport,
) -> Result<(), PipelineError> {
    let gt = render_patch_mask(gt_code, spec, mask.width())
        .map_err(|e| PipelineError::at(Stage::Decode, e))?;
    let errs = pin_errors(mask, &gt, spec).map_err(|e| PipelineError::at(Stage::Decode, e))?;
    report.mpe = Some(errs.iter().copied().fold(0.0, f64::max));
    report.mean_pin_error = Some(errs.iter().sum::<f64>() / errs.len() as f64);
    let s = config.mask_size;
    let (a, b) = (mask.resize_nearest(s, s), gt.resize_nearest(s, s));
    report.overlap = pixel_overlap(&a, &b, OverlapMode::Paper).ok();
    report.iou = pixel_overlap(&a, &b, OverlapMode::Iou).ok();
    Ok(())
}

/// Share of boundary steps whose direction matches the previous step.
fn smoothness(boundary: &[(usize, usize)]) -> f64 {
    let n = boundary.len();
    if n < 3 {
        return 0.0;
    }
    let step = |i: usize| {
        let (a, b) = (boundary[i], boundary[(i + 1) % n]);
        (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64)
    };
    let same = (0..n).filter(|&i| step(i) == step((i + 1) % n)).count();
    same as f64 / n as f64
}

/// Scene box of a mask in the rectified patch.
pub fn patch_box_in_scene(mask: &BitMask, theta: &PerspectiveParams) -> Option<BoxF> {
    mask_box_in_scene(mask, &theta.inverse().ok()?)
}
