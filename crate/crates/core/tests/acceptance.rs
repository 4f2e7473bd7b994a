#![allow(clippy::needless_range_loop)]

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p keyforge-core --test acceptance -- --nocapture`.

mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use keyforge::bitting::{CutGeometry, DepthChart, Keypoints};
use keyforge::geometry::{homography_from_correspondences, warp_image};
use keyforge::metrics::{
    average_precision, loss_classification, loss_pixel_bce, max_pin_error, mean_pin_error,
    pixel_overlap, roc_auc, BoxF, ClassificationLoss, Detection, OverlapMode,
};
use keyforge::model3d::{
    attach_bow, build_blade_mesh, mesh_diagnostics, stl_from_bytes, stl_to_bytes,
};
use keyforge::pipeline::{eval_dataset, Arrangement, EvalReport, PipelineConfig};
use keyforge::synth::{
    generate_dataset, manifest_path, random_code, render_patch_mask, DatasetOptions, SceneOptions,
};
use keyforge::{BitMask, BittingCode, BowSpec, HeightProfile, KeySpec, Point2, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{
    ap_oracle, auc_pairwise, exact_homography, jittered_square, naive_bce, naive_log_loss,
    naive_softmax_ce, smooth_image,
};

// Pinned tolerances.
const EXACT_CODE_RATE_MIN: f64 = 0.99;
const MPE_GATE: f64 = 0.012;
const MPE_PASS_RATE_MIN: f64 = 0.95;
const KEY_LENGTH_MIN_PX: f64 = 512.0;
const ROUND_TRIP_SECONDS_MAX: f64 = 60.0;
const HOMOGRAPHY_PARAM_TOL: f64 = 1e-9;
const WARP_ROUND_TRIP_TOL: f32 = 0.02;
const VOLUME_ORACLE_TOL: f64 = 0.005;
const VOLUME_REFINE_TOL: f64 = 0.002;
const LOSS_TOL: f64 = 1e-10;
const NOFRAME_GAP_MAX: f64 = 0.01;

const SCENES: usize = 100;
const SEED: u64 = 2024;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u8, name: &'static str, checks: &[(bool, String)]) -> Outcome {
    Outcome {
        id,
        name,
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|c| c.1.as_str())
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn pipeline_config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        patch_size: 640,
        mpe_gate: MPE_GATE,
        stations: 96,
        ring: 48,
        out_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

fn dataset_options() -> DatasetOptions {
    DatasetOptions {
        seed: SEED,
        count: SCENES,
        frame: true,
        augmented: false,
        scene: SceneOptions::default(),
    }
}

fn single_core<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_1(data: &Path, out: &Path) -> (Outcome, EvalReport) {
    let spec = KeySpec::default();
    let start = Instant::now();
    let (manifest, report) = single_core(|| {
        let m = generate_dataset(&spec, &dataset_options(), data).unwrap();
        let r = eval_dataset(&manifest_path(data), &pipeline_config(out), None).unwrap();
        (m, r)
    });
    let secs = start.elapsed().as_secs_f64();
    let shortest = manifest
        .scenes
        .iter()
        .map(|a| a.bbox.width().max(a.bbox.height()))
        .fold(f64::INFINITY, f64::min);
    let a = &report.aggregate;
    let o = outcome(
        1,
        "synthetic round-trip",
        &[
            (
                shortest >= KEY_LENGTH_MIN_PX,
                format!("shortest key {shortest:.0} px >= {KEY_LENGTH_MIN_PX}"),
            ),
            (
                a.exact_code_rate >= EXACT_CODE_RATE_MIN,
                format!(
                    "exact codes {:.3} >= {EXACT_CODE_RATE_MIN}",
                    a.exact_code_rate
                ),
            ),
            (
                a.mpe_pass_rate >= MPE_PASS_RATE_MIN,
                format!(
                    "MPE <= {MPE_GATE} on {:.3} >= {MPE_PASS_RATE_MIN}",
                    a.mpe_pass_rate
                ),
            ),
            (
                secs < ROUND_TRIP_SECONDS_MAX,
                format!("{SCENES} scenes in {secs:.1} s on one core"),
            ),
        ],
    );
    (o, report)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_param = 0.0f64;
    let mut worst_warp = 0.0f32;
    let img = smooth_image(96, 96);
    for i in 0..1000 {
        let a: [f64; 8] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let b: [f64; 8] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let size = rng.random_range(50.0..1500.0);
        let src = jittered_square(size, 0.15, &a);
        let dst = jittered_square(size * rng.random_range(0.5..1.5), 0.15, &b);
        let h = homography_from_correspondences(&src, &dst).unwrap();
        let exact = exact_homography(&src, &dst).unwrap();
        for k in 0..8 {
            worst_param = worst_param.max((h.theta[k] - exact[k]).abs());
        }
        if i % 10 == 0 {
            // Mild warps of a smooth image, compared away from the border.
            let h = homography_from_correspondences(
                &jittered_square(96.0, 0.0, &[0.0; 8]),
                &jittered_square(96.0, 0.06, &b),
            )
            .unwrap();
            let back = warp_image(
                &warp_image(&img, &h, 96, 96).unwrap(),
                &h.inverse().unwrap(),
                96,
                96,
            )
            .unwrap();
            for y in 12..84 {
                for x in 12..84 {
                    worst_warp = worst_warp.max((back.get(x, y, 0) - img.get(x, y, 0)).abs());
                }
            }
        }
    }
    outcome(
        2,
        "homography",
        &[
            (
                worst_param < HOMOGRAPHY_PARAM_TOL,
                format!("1000 fits, max param error {worst_param:.2e} < {HOMOGRAPHY_PARAM_TOL:e}"),
            ),
            (
                worst_warp < WARP_ROUND_TRIP_TOL,
                format!("warp round trip max {worst_warp:.4} < {WARP_ROUND_TRIP_TOL}"),
            ),
        ],
    )
}

fn shoelace(pts: &[Point2]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| pts[i].x * pts[(i + 1) % n].y - pts[(i + 1) % n].x * pts[i].y)
        .sum::<f64>()
}

fn criterion_3(out: &Path) -> Outcome {
    let spec = KeySpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut unsound = 0;
    let mut checked = 0;
    let mut check = |mesh: &TriMesh| {
        checked += 1;
        let d = mesh_diagnostics(mesh);
        let shells_ok = mesh.shells().iter().all(|s| {
            let s = mesh_diagnostics(s);
            s.watertight && s.euler == 2 && s.volume_mm3 > 0.0 && s.degenerate_triangles == 0
        });
        if !(d.watertight && d.volume_mm3 > 0.0 && d.degenerate_triangles == 0 && shells_ok) {
            unsound += 1;
        }
    };
    for _ in 0..40 {
        let code = random_code(&spec, &mut rng);
        let profile = HeightProfile::from_code(&code, &spec, &CutGeometry::default(), 256).unwrap();
        let blade = build_blade_mesh(&spec, &profile, 256, 128).unwrap();
        check(&attach_bow(&blade, &BowSpec::default(), &spec).unwrap());
    }
    // Every STL the pipeline wrote in criterion 1.
    for entry in fs::read_dir(out.join("orig_frame")).unwrap() {
        let p = entry.unwrap().path().join("key.stl");
        if p.exists() {
            check(&stl_from_bytes(&fs::read(&p).unwrap()).unwrap());
        }
    }
    let flat = HeightProfile::constant(spec.blade_length_mm, spec.blade_height_mm).unwrap();
    let v = build_blade_mesh(&spec, &flat, 32, 64).unwrap().volume();
    let oracle = shoelace(&spec.keyway).abs() * spec.blade_length_mm;
    let vol_err = (v - oracle).abs() / oracle;
    let code = BittingCode::new(vec![0, 7, 2, 8, 4]);
    let vol = |n: usize, ring: usize| {
        let p = HeightProfile::from_code(&code, &spec, &CutGeometry::default(), n).unwrap();
        build_blade_mesh(&spec, &p, n, ring).unwrap().volume()
    };
    let (coarse, fine) = (vol(256, 128), vol(512, 256));
    let refine = (coarse - fine).abs() / fine;
    outcome(
        3,
        "mesh soundness",
        &[
            (
                unsound == 0,
                format!("{unsound} of {checked} meshes unsound"),
            ),
            (
                vol_err < VOLUME_ORACLE_TOL,
                format!("constant profile volume error {vol_err:.2e} < {VOLUME_ORACLE_TOL}"),
            ),
            (
                refine < VOLUME_REFINE_TOL,
                format!("doubling changes volume {refine:.2e} < {VOLUME_REFINE_TOL}"),
            ),
        ],
    )
}

fn criterion_4() -> Outcome {
    let v = |x: f64, y: f64, z: f64| [x, y, z];
    let cube = TriMesh {
        vertices: vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(1., 1., 0.),
            v(0., 1., 0.),
            v(0., 0., 1.),
            v(1., 0., 1.),
            v(1., 1., 1.),
            v(0., 1., 1.),
        ],
        triangles: vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ],
    };
    let bytes = stl_to_bytes(&cube).unwrap();
    let spec = KeySpec::default();
    let code = BittingCode::new(vec![2, 4, 0, 7, 5]);
    let profile = HeightProfile::from_code(&code, &spec, &CutGeometry::default(), 128).unwrap();
    let key = attach_bow(
        &build_blade_mesh(&spec, &profile, 128, 64).unwrap(),
        &BowSpec::default(),
        &spec,
    )
    .unwrap();
    // Coordinates go through f32 once; after that the round trip is exact.
    let tris = |m: &TriMesh| {
        (0..m.triangles.len())
            .map(|i| m.triangle(i))
            .collect::<Vec<_>>()
    };
    let once = stl_from_bytes(&stl_to_bytes(&key).unwrap()).unwrap();
    let twice = stl_from_bytes(&stl_to_bytes(&once).unwrap()).unwrap();
    let cube_back = stl_from_bytes(&bytes).unwrap();
    outcome(
        4,
        "STL bit-exactness",
        &[
            (
                bytes.len() == 684,
                format!("cube file {} bytes", bytes.len()),
            ),
            (
                tris(&cube_back) == tris(&cube) && stl_to_bytes(&cube_back).unwrap() == bytes,
                "cube round trip exact".into(),
            ),
            (
                tris(&once) == tris(&twice)
                    && stl_to_bytes(&once).unwrap() == stl_to_bytes(&key).unwrap(),
                format!(
                    "key round trip exact over {} triangles",
                    key.triangles.len()
                ),
            ),
        ],
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut gts: BTreeMap<String, Vec<BoxF>> = BTreeMap::new();
    let rand_box = |rng: &mut ChaCha8Rng| {
        let (x, y) = (
            f64::from(rng.random_range(0u8..4)) * 2.0,
            f64::from(rng.random_range(0u8..4)) * 2.0,
        );
        BoxF::new(
            x,
            y,
            x + f64::from(rng.random_range(1u8..4)) * 2.0,
            y + f64::from(rng.random_range(1u8..4)) * 2.0,
        )
    };
    let mut ap_mismatch = 0;
    for _ in 0..500 {
        gts.clear();
        gts.insert(
            "a".into(),
            (0..rng.random_range(1..3))
                .map(|_| rand_box(&mut rng))
                .collect(),
        );
        gts.insert(
            "b".into(),
            (0..rng.random_range(0..3))
                .map(|_| rand_box(&mut rng))
                .collect(),
        );
        let n = rng.random_range(0..=5);
        let dets: Vec<Detection> = (0..n)
            .map(|_| Detection {
                image_id: if rng.random_bool(0.5) { "a" } else { "b" }.into(),
                bbox: rand_box(&mut rng),
                score: f64::from(rng.random_range(0u8..4)) / 4.0,
            })
            .collect();
        for thr in [0.3, 0.5] {
            if average_precision(&dets, &gts, thr).unwrap().ap != ap_oracle(&dets, &gts, thr) {
                ap_mismatch += 1;
            }
        }
    }
    let mut auc_mismatch = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..50);
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0u8..6)))
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if let Ok(a) = roc_auc(&scores, &labels) {
            if a != auc_pairwise(&scores, &labels) {
                auc_mismatch += 1;
            }
        }
    }
    let pred = BitMask::from_fn(4, 4, |x, _| x < 2);
    let gt = BitMask::from_fn(4, 4, |x, _| (1..3).contains(&x));
    let paper = pixel_overlap(&pred, &gt, OverlapMode::Paper).unwrap();
    let iou = pixel_overlap(&pred, &gt, OverlapMode::Iou).unwrap();
    let mut loss_err = 0.0f64;
    for _ in 0..2000 {
        let n = rng.random_range(2..8);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..=30.0)).collect();
        let label = rng.random_range(0..n);
        let ce = loss_classification(&logits, label, ClassificationLoss::SoftmaxCe).unwrap();
        let ll = loss_classification(&logits, label, ClassificationLoss::LogLoss).unwrap();
        let m = BitMask::from_fn(n, 1, |x, _| x == label);
        let bce = loss_pixel_bce(&logits, &m).unwrap();
        let naive = logits
            .iter()
            .enumerate()
            .map(|(i, &z)| naive_bce(z, i == label))
            .sum::<f64>()
            / n as f64;
        loss_err = loss_err
            .max((ce - naive_softmax_ce(&logits, label)).abs())
            .max((ll - naive_log_loss(&logits, label)).abs())
            .max((bce - naive).abs());
    }
    outcome(
        5,
        "metric oracles",
        &[
            (
                ap_mismatch == 0,
                format!("AP mismatches {ap_mismatch}/1000"),
            ),
            (
                auc_mismatch == 0,
                format!("AUC mismatches {auc_mismatch}/500"),
            ),
            (
                paper == 0.5 && iou == 1.0 / 3.0,
                format!("half overlap {paper} / {iou}"),
            ),
            (
                loss_err < LOSS_TOL,
                format!("loss error {loss_err:.1e} < {LOSS_TOL:e}"),
            ),
        ],
    )
}

fn criterion_6() -> Outcome {
    let unit = KeySpec {
        blade_length_mm: 100.0,
        blade_height_mm: 100.0,
        pin_positions_mm: vec![10.0, 30.0, 50.0, 70.0, 90.0],
        depth_chart: DepthChart {
            num_depths: 10,
            shallowest_mm: 95.0,
            increment_mm: 5.0,
        },
        ..KeySpec::default()
    };
    let strip = |dent: usize| {
        BitMask::from_fn(120, 120, |x, y| {
            let top = if x == 60 { 90 + dent } else { 90 };
            (10..110).contains(&x) && (top..110).contains(&y)
        })
        .with_keypoints(Keypoints {
            shoulder: Point2::new(10.0, 110.0),
            tip: Point2::new(110.0, 110.0),
        })
    };
    let mpe = max_pin_error(&strip(3), &strip(0), &unit).unwrap();
    let spec = KeySpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0;
    for _ in 0..1000 {
        let a = render_patch_mask(&random_code(&spec, &mut rng), &spec, 128).unwrap();
        let b = render_patch_mask(&random_code(&spec, &mut rng), &spec, 128).unwrap();
        if max_pin_error(&a, &b, &spec).unwrap() < mean_pin_error(&a, &b, &spec).unwrap() {
            bad += 1;
        }
    }
    outcome(
        6,
        "MPE semantics",
        &[
            (mpe == 0.03, format!("3 px on 100 px blade gives {mpe}")),
            (bad == 0, format!("MPE < mean on {bad}/1000 pairs")),
        ],
    )
}

fn criterion_7(data: &Path, out: &Path, framed: &EvalReport) -> Outcome {
    let noframe = eval_dataset(
        &manifest_path(data),
        &pipeline_config(out),
        Some(Arrangement {
            augmented: false,
            frame: false,
        }),
    )
    .unwrap();
    let gap = (framed.aggregate.exact_code_rate - noframe.aggregate.exact_code_rate).abs();
    outcome(
        7,
        "noframe control",
        &[(
            gap < NOFRAME_GAP_MAX,
            format!(
                "exact codes frame {:.3} vs noframe {:.3}, gap {gap:.3} < {NOFRAME_GAP_MAX}",
                framed.aggregate.exact_code_rate, noframe.aggregate.exact_code_rate
            ),
        )],
    )
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
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

fn criterion_8() -> Outcome {
    let run = || {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let opts = DatasetOptions {
            count: 12,
            augmented: true,
            ..dataset_options()
        };
        generate_dataset(&KeySpec::default(), &opts, data.path()).unwrap();
        eval_dataset(
            &manifest_path(data.path()),
            &pipeline_config(out.path()),
            None,
        )
        .unwrap();
        (tree(data.path()), tree(out.path()))
    };
    let (a, b) = (run(), run());
    let stls = a.1.iter().filter(|(p, _)| p.ends_with("key.stl")).count();
    outcome(
        8,
        "determinism",
        &[
            (
                a.0 == b.0,
                format!("dataset trees identical ({} files)", a.0.len()),
            ),
            (
                a.1 == b.1 && stls > 0,
                format!("report and {stls} STL files identical"),
            ),
        ],
    )
}

#[test]
fn acceptance() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let (c1, framed) = criterion_1(data.path(), out.path());
    let results = vec![
        c1,
        criterion_2(),
        criterion_3(out.path()),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(data.path(), out.path(), &framed),
        criterion_8(),
    ];
    for r in &results {
        println!(
            "criterion {} {}: {} ({})",
            r.id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
