use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use keyforge::bitting::{
    decode_mask, extract_boundary, locate_keypoints, segment_threshold_with, validate_macs,
    CutGeometry, SegmentOptions,
};
use keyforge::geometry::{flip_horizontal, homography_from_correspondences, warp_image};
use keyforge::model3d::{
    attach_bow, bitting_height_profile, build_blade_mesh, emit_csg_script, mesh_diagnostics,
    write_stl,
};
use keyforge::pipeline::{
    eval_dataset, run_pipeline, Arrangement, DetectorKind, PipelineConfig, SceneInput,
    SegmenterKind,
};
use keyforge::synth::{
    canonical_frame_corners, generate_dataset, DatasetOptions, Manifest, SceneAnnotation,
    SceneOptions,
};
use keyforge::{
    BitMask, BittingCode, BowSpec, HeightProfile, KeySpec, PerspectiveParams, Point2, RasterImage,
};

#[derive(Parser)]
#[command(
    name = "keyforge",
    version,
    about = "Decode key bitting from images and build printable key models"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Key spec JSON; the built-in five-pin spec when absent.
    #[arg(long, global = true)]
    keyspec: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene dataset with a manifest.
    Synth(SynthArgs),
    /// Warp a scene image to the upright key patch.
    Rectify(RectifyArgs),
    /// Threshold-segment a rectified patch into a key mask.
    Segment(SegmentArgs),
    /// Decode the bitting code of an upright key mask.
    Decode(DecodeArgs),
    /// Build a key STL from a code or an upright mask.
    Model(ModelArgs),
    /// Evaluate the pipeline over a dataset manifest.
    Eval(EvalArgs),
    /// Run every stage on one scene.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Leave out the marker frame.
    #[arg(long)]
    noframe: bool,
    /// Apply random crop, scale, shift and mirror.
    #[arg(long)]
    augmented: bool,
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 640)]
    patch_size: usize,
}

/// Where the scene-to-patch transform comes from.
#[derive(Args)]
struct SceneSource {
    /// Manifest holding the scene's annotation.
    #[arg(long, requires = "id")]
    manifest: Option<PathBuf>,
    /// Scene id within the manifest.
    #[arg(long, requires = "manifest")]
    id: Option<String>,
    /// Marker-frame corners as x0,y0,x1,y1,x2,y2,x3,y3 (scene pixels).
    #[arg(long, value_parser = parse_corners, conflicts_with = "manifest")]
    corners: Option<[Point2; 4]>,
}

#[derive(Args)]
struct RectifyArgs {
    /// Scene image; taken from the manifest when omitted.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    source: SceneSource,
    #[arg(long, default_value_t = 640)]
    patch_size: usize,
    /// Output patch PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    /// Rectified patch PNG.
    #[arg(long)]
    patch: PathBuf,
    /// Output mask PNG.
    #[arg(long)]
    out: PathBuf,
    /// Minimum foreground/background contrast.
    #[arg(long, default_value_t = 0.25)]
    min_contrast: f32,
}

#[derive(Args)]
struct DecodeArgs {
    /// Upright key mask PNG (bitting up, tip right).
    #[arg(long)]
    mask: PathBuf,
    /// Print heights and MACS status as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Hyphenated bitting code, e.g. 2-4-0-7-5.
    #[arg(long, conflicts_with = "mask", required_unless_present = "mask")]
    code: Option<String>,
    /// Upright key mask PNG to take the profile from.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output STL.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    stations: usize,
    #[arg(long, default_value_t = 128)]
    ring: usize,
    /// Also write an OpenSCAD script of the same key.
    #[arg(long)]
    csg: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineOverrides {
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `threshold` or `mask_file`.
    #[arg(long, value_parser = parse_segmenter)]
    segmenter: Option<SegmenterKind>,
    /// `annotation` or `marker_box`.
    #[arg(long, value_parser = parse_detector)]
    detector: Option<DetectorKind>,
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    stations: Option<usize>,
    #[arg(long)]
    ring: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output root; reports go to <out>/<arrangement>/report.json.
    #[arg(long)]
    out: PathBuf,
    /// orig_frame, orig_noframe, aug_frame, aug_noframe or all; the
    /// manifest's own when omitted.
    #[arg(long)]
    arrangement: Option<String>,
    #[command(flatten)]
    overrides: PipelineOverrides,
}

#[derive(Args)]
struct PipelineArgs {
    /// Scene image; taken from the manifest when omitted.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    source: SceneSource,
    /// Precomputed patch mask for the mask_file segmenter.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output root; artifacts go to <out>/<id>/.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: PipelineOverrides,
}

fn parse_corners(s: &str) -> Result<[Point2; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 8 {
        return Err(format!("expected 8 numbers, got {}", v.len()));
    }
    Ok(std::array::from_fn(|i| Point2::new(v[2 * i], v[2 * i + 1])))
}

fn parse_segmenter(s: &str) -> Result<SegmenterKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown segmenter {s:?}"))
}

fn parse_detector(s: &str) -> Result<DetectorKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown detector {s:?}"))
}

fn load_spec(path: Option<&Path>) -> Result<KeySpec> {
    match path {
        Some(p) => KeySpec::load(p).with_context(|| format!("loading key spec {}", p.display())),
        None => Ok(KeySpec::default()),
    }
}

/// Writes one line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

/// Annotation from `--manifest/--id`, with the image path resolved.
fn lookup_scene(source: &SceneSource) -> Result<Option<(SceneAnnotation, PathBuf)>> {
    let (Some(m), Some(id)) = (&source.manifest, &source.id) else {
        return Ok(None);
    };
    let manifest = Manifest::load(m)?;
    let ann = manifest
        .scenes
        .into_iter()
        .find(|a| &a.id == id)
        .with_context(|| format!("scene {id:?} not in {}", m.display()))?;
    let image = m.parent().unwrap_or(Path::new(".")).join(&ann.image);
    Ok(Some((ann, image)))
}

fn resolve_image(
    explicit: Option<&PathBuf>,
    scene: Option<&(SceneAnnotation, PathBuf)>,
) -> Result<PathBuf> {
    match (explicit, scene) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some((_, p))) => Ok(p.clone()),
        (None, None) => bail!("--image is required without --manifest"),
    }
}

fn pipeline_config(cli: &Cli, overrides: &PipelineOverrides, out: &Path) -> Result<PipelineConfig> {
    let mut cfg = match &overrides.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.keyspec.is_some() {
        cfg.keyspec = cli.keyspec.clone();
    }
    if let Some(s) = overrides.segmenter {
        cfg.segmenter = s;
    }
    if let Some(d) = overrides.detector {
        cfg.detector = d;
    }
    cfg.patch_size = overrides.patch_size.unwrap_or(cfg.patch_size);
    cfg.stations = overrides.stations.unwrap_or(cfg.stations);
    cfg.ring = overrides.ring.unwrap_or(cfg.ring);
    cfg.out_dir = out.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<ExitCode> {
    let spec = load_spec(cli.keyspec.as_deref())?;
    let opts = DatasetOptions {
        seed: cli.seed,
        count: args.count,
        frame: !args.noframe,
        augmented: args.augmented,
        scene: SceneOptions {
            width: args.width,
            height: args.height,
            patch_size: args.patch_size,
            ..SceneOptions::default()
        },
    };
    let manifest = generate_dataset(&spec, &opts, &args.out)?;
    emit(&format!(
        "{} scenes written to {}",
        manifest.scenes.len(),
        args.out.display()
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn rectify(args: &RectifyArgs) -> Result<ExitCode> {
    let scene = lookup_scene(&args.source)?;
    let image = RasterImage::load_png(&resolve_image(args.image.as_ref(), scene.as_ref())?)?;
    let p = args.patch_size;
    let (theta, flip) = match (&scene, args.source.corners) {
        (_, Some(c)) => (
            homography_from_correspondences(&c, &canonical_frame_corners(p))?,
            false,
        ),
        (Some((ann, _)), None) => {
            let k = p as f64 / ann.patch_size as f64;
            (
                PerspectiveParams::scale(k, k).compose(&ann.theta)?,
                ann.flip,
            )
        }
        (None, None) => bail!("give --corners or --manifest with --id"),
    };
    let mut patch = warp_image(&image, &theta, p, p)?;
    if flip {
        patch = flip_horizontal(&patch);
    }
    patch.save_png(&args.out)?;
    print_json(&theta)?;
    Ok(ExitCode::SUCCESS)
}

fn segment(args: &SegmentArgs) -> Result<ExitCode> {
    let patch = RasterImage::load_png(&args.patch)?;
    let opts = SegmentOptions {
        min_contrast: args.min_contrast,
    };
    let seg = segment_threshold_with(&patch, &opts).context("segment stage failed")?;
    seg.mask.save_png(&args.out)?;
    print_json(&serde_json::json!({
        "threshold": seg.threshold,
        "separability": seg.separability,
        "contrast": seg.contrast,
        "pixels": seg.mask.count(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn decode(cli: &Cli, args: &DecodeArgs) -> Result<ExitCode> {
    let spec = load_spec(cli.keyspec.as_deref())?;
    let mask = BitMask::load_png(&args.mask)?;
    let (code, heights) = decode_mask(&mask, &spec).context("decode stage failed")?;
    let macs = validate_macs(&code, &spec)?;
    if args.json {
        print_json(&serde_json::json!({
            "code": code.to_string(),
            "heights": heights,
            "macs": macs,
        }))?;
    } else {
        emit(&code.to_string())?;
    }
    if !macs.is_valid() {
        eprintln!("error: {code} violates MACS {}", spec.macs);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn model(cli: &Cli, args: &ModelArgs) -> Result<ExitCode> {
    let spec = load_spec(cli.keyspec.as_deref())?;
    let profile = if let Some(code) = &args.code {
        let code: BittingCode = code.parse()?;
        code.check_shape(&spec)?;
        let macs = validate_macs(&code, &spec)?;
        if !macs.is_valid() {
            eprintln!(
                "error: {code} violates MACS {}; no model written",
                spec.macs
            );
            return Ok(ExitCode::from(1));
        }
        HeightProfile::from_code(&code, &spec, &CutGeometry::default(), args.stations)?
    } else {
        let path = args.mask.as_ref().expect("clap enforces --code or --mask");
        let mask = BitMask::load_png(path)?;
        let kp = locate_keypoints(&mask)?;
        let (code, _) = decode_mask(&mask, &spec)?;
        ensure!(
            validate_macs(&code, &spec)?.is_valid(),
            "decoded {code} violates MACS {}",
            spec.macs
        );
        bitting_height_profile(&extract_boundary(&mask)?, &kp, &spec, args.stations)?
    };
    let blade = build_blade_mesh(&spec, &profile, args.stations, args.ring)?;
    let bow = BowSpec::default();
    let key = attach_bow(&blade, &bow, &spec)?;
    write_stl(&key, &args.out)?;
    if let Some(csg) = &args.csg {
        emit_csg_script(&spec, &profile, &bow, csg)?;
    }
    print_json(&mesh_diagnostics(&key))?;
    Ok(ExitCode::SUCCESS)
}

fn eval(cli: &Cli, args: &EvalArgs) -> Result<ExitCode> {
    let cfg = pipeline_config(cli, &args.overrides, &args.out)?;
    let arrangements: Vec<Option<Arrangement>> = match args.arrangement.as_deref() {
        None => vec![None],
        Some("all") => Arrangement::ALL.into_iter().map(Some).collect(),
        Some(s) => vec![Some(s.parse()?)],
    };
    let mut summaries = serde_json::Map::new();
    for arr in arrangements {
        let report = eval_dataset(&args.manifest, &cfg, arr)?;
        summaries.insert(
            report.arrangement.to_string(),
            serde_json::to_value(&report.aggregate)?,
        );
    }
    print_json(&summaries)?;
    Ok(ExitCode::SUCCESS)
}

fn pipeline(cli: &Cli, args: &PipelineArgs) -> Result<ExitCode> {
    let cfg = pipeline_config(cli, &args.overrides, &args.out)?;
    let spec = cfg.load_keyspec()?;
    let scene = lookup_scene(&args.source)?;
    let image = RasterImage::load_png(&resolve_image(args.image.as_ref(), scene.as_ref())?)?;
    let mask = match &args.mask {
        Some(p) => Some(BitMask::load_png(p)?),
        None => None,
    };
    let id = match (&args.source.id, &args.image) {
        (Some(id), _) => id.clone(),
        (None, Some(p)) => p
            .file_stem()
            .map_or("scene".into(), |s| s.to_string_lossy().into_owned()),
        (None, None) => "scene".into(),
    };
    let input = SceneInput {
        id,
        image: Some(image),
        corners: args.source.corners,
        mask,
        annotation: scene.map(|(a, _)| a),
    };
    let report = run_pipeline(&input, &spec, &cfg);
    print_json(&report)?;
    if let Some(f) = &report.failure {
        eprintln!("error: {}", f.message);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Rectify(a) => rectify(a),
        Command::Segment(a) => segment(a),
        Command::Decode(a) => decode(cli, a),
        Command::Model(a) => model(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Pipeline(a) => pipeline(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
