use std::fs;
use std::path::{Path, PathBuf};

use keyforge::pipeline::{
    eval_dataset, run_pipeline, Arrangement, DetectorKind, PipelineConfig, PipelineError,
    SceneInput, Stage,
};
use keyforge::synth::{generate_dataset, manifest_path, DatasetOptions, SceneOptions, SynthError};
use keyforge::{KeySpec, RasterImage};

fn dataset(dir: &Path, count: usize, seed: u64) -> PathBuf {
    let opts = DatasetOptions {
        seed,
        count,
        scene: SceneOptions {
            width: 400,
            height: 400,
            patch_size: 256,
            ..SceneOptions::default()
        },
        ..DatasetOptions::default()
    };
    generate_dataset(&KeySpec::default(), &opts, dir).unwrap();
    manifest_path(dir)
}

fn config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        patch_size: 256,
        stations: 48,
        ring: 24,
        mpe_gate: 0.05,
        out_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_evaluation_is_byte_identical() {
    let data = tempfile::tempdir().unwrap();
    let m = dataset(data.path(), 6, 21);
    let (o1, o2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for arr in [
        None,
        Some(Arrangement {
            augmented: true,
            frame: true,
        }),
    ] {
        eval_dataset(&m, &config(o1.path()), arr).unwrap();
        eval_dataset(&m, &config(o2.path()), arr).unwrap();
    }
    let (a, b) = (files(o1.path()), files(o2.path()));
    assert!(a.iter().any(|(p, _)| p.ends_with("key.stl")));
    assert!(a.iter().any(|(p, _)| p.ends_with("report.json")));
    assert_eq!(a, b);
}

#[test]
fn reports_reference_artifacts_for_completed_stages() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = dataset(data.path(), 6, 4);
    let cfg = PipelineConfig {
        detector: DetectorKind::MarkerBox,
        ..config(out.path())
    };
    let r = eval_dataset(
        &m,
        &cfg,
        Some(Arrangement {
            augmented: true,
            frame: true,
        }),
    )
    .unwrap();
    let root = out.path().join("aug_frame");
    for k in &r.keys {
        for a in [
            &k.artifacts.patch,
            &k.artifacts.mask,
            &k.artifacts.profile,
            &k.artifacts.stl,
        ]
        .into_iter()
        .flatten()
        {
            assert!(root.join(a).exists(), "{a}");
        }
        if k.ok() {
            assert!(k.artifacts.stl.is_some() && k.mesh.as_ref().unwrap().watertight);
        } else {
            assert!(!root.join(&k.id).join("key.stl").exists());
        }
        if k.pass {
            assert_eq!(k.macs_valid, Some(true));
            assert!(k.mpe.unwrap() <= cfg.mpe_gate);
        }
    }
    assert_eq!(r.aggregate.exact_code_rate, 1.0, "{:?}", r.aggregate);
}

#[test]
fn marker_detector_cannot_run_without_the_frame() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = dataset(data.path(), 2, 8);
    let cfg = PipelineConfig {
        detector: DetectorKind::MarkerBox,
        ..config(out.path())
    };
    let r = eval_dataset(
        &m,
        &cfg,
        Some(Arrangement {
            augmented: false,
            frame: false,
        }),
    )
    .unwrap();
    assert_eq!(r.aggregate.failures_by_stage.get("detect"), Some(&2));
    assert_eq!(r.aggregate.ok_count, 0);
}

#[test]
fn empty_or_missing_manifest_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("manifest.jsonl");
    fs::write(&path, "\n").unwrap();
    let err = eval_dataset(&path, &config(d.path()), None).unwrap_err();
    assert_eq!(err, PipelineError::Dataset(SynthError::EmptyDataset));
    assert!(eval_dataset(&d.path().join("nope.jsonl"), &config(d.path()), None).is_err());
}

#[test]
fn background_only_scene_stops_without_a_model() {
    let out = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    let m = dataset(data.path(), 1, 2);
    let manifest = keyforge::synth::Manifest::load(&m).unwrap();
    let input = SceneInput {
        id: "empty".into(),
        image: Some(RasterImage::filled(400, 400, 3, 0.1)),
        annotation: Some(manifest.scenes[0].clone()),
        ..SceneInput::default()
    };
    let r = run_pipeline(&input, &KeySpec::default(), &config(out.path()));
    assert_eq!(r.failure.unwrap().stage, Stage::Segment);
    assert!(!out.path().join("empty/key.stl").exists());
    assert!(out.path().join("empty/patch.png").exists());
}

#[test]
fn config_file_loads_with_defaults() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("cfg.json");
    fs::write(&p, r#"{"detector": "marker_box", "patch_size": 320}"#).unwrap();
    let c = PipelineConfig::load(&p).unwrap();
    assert_eq!(c.detector, DetectorKind::MarkerBox);
    assert_eq!((c.patch_size, c.mask_size), (320, 56));
    assert!(matches!(
        PipelineConfig::from_json(r#"{"patch_size": 8}"#),
        Err(PipelineError::Config(_))
    ));
}
