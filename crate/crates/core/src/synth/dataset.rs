use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    augment, compose_scene, random_background, random_code, random_scene_theta, render_patch_mask,
    SceneAnnotation, SceneOptions, SceneRecipe, SynthError,
};
use crate::bitting::{BitMask, KeySpec};
use crate::geometry::RasterImage;

pub const MANIFEST_FORMAT: &str = "keyforge-manifest/1";

/// First line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub seed: u64,
    pub count: usize,
    pub frame: bool,
    pub augmented: bool,
    pub scene: SceneOptions,
    pub keyspec: KeySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub scenes: Vec<SceneAnnotation>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serialises");
        s.push('\n');
        for a in &self.scenes {
            s.push_str(&serde_json::to_string(a).expect("annotation serialises"));
            s.push('\n');
        }
        s
    }

    /// Parses JSON Lines; blank lines are skipped, errors carry 1-based line numbers.
    pub fn from_jsonl(text: &str) -> Result<Self, SynthError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (n, first) = lines.next().ok_or(SynthError::EmptyDataset)?;
        let header: ManifestHeader =
            serde_json::from_str(first).map_err(|e| SynthError::ManifestParse {
                line: n + 1,
                message: e.to_string(),
            })?;
        if header.format != MANIFEST_FORMAT {
            return Err(SynthError::ManifestParse {
                line: n + 1,
                message: format!("unknown format {:?}", header.format),
            });
        }
        let scenes = lines
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| SynthError::ManifestParse {
                    line: n + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<SceneAnnotation>, _>>()?;
        if scenes.is_empty() {
            return Err(SynthError::EmptyDataset);
        }
        Ok(Self { header, scenes })
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let mut f = fs::File::create(path)
            .map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub seed: u64,
    pub count: usize,
    pub frame: bool,
    pub augmented: bool,
    pub scene: SceneOptions,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            frame: true,
            augmented: false,
            scene: SceneOptions::default(),
        }
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: RasterImage,
    pub annotation: SceneAnnotation,
    /// Upright ground-truth mask in the rectified patch.
    pub gt_mask: BitMask,
}

/// Seed of scene `index` in a dataset seeded with `master`.
pub fn scene_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:05}")
}

/// Builds one scene from its recipe. Every random draw happens whatever the
/// recipe's `frame` and `augment` flags, so toggling them changes only what
/// they control.
pub fn generate_scene(
    spec: &KeySpec,
    opts: &SceneOptions,
    recipe: &SceneRecipe,
) -> Result<Scene, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let code = random_code(spec, &mut rng);
    let theta = random_scene_theta(opts, &mut rng)?;
    let (bg_seed, compose_seed, augment_seed): (u64, u64, u64) =
        (rng.random(), rng.random(), rng.random());
    let gt_mask = render_patch_mask(&code, spec, opts.patch_size)?;
    let bg = random_background(opts.width, opts.height, bg_seed);
    let (mut image, mut annotation) =
        compose_scene(&gt_mask, &code, &bg, &theta, recipe.frame, compose_seed)?;
    if recipe.augment {
        (image, annotation) = augment(&image, &annotation, augment_seed)?;
    }
    annotation.recipe = recipe.clone();
    Ok(Scene {
        image,
        annotation,
        gt_mask,
    })
}

/// Generates `opts.count` scenes in parallel and writes
/// `images/<id>.png`, `masks/<id>.png` and `manifest.jsonl` under `out_dir`.
pub fn generate_dataset(
    spec: &KeySpec,
    opts: &DatasetOptions,
    out_dir: &Path,
) -> Result<Manifest, SynthError> {
    opts.scene.validate()?;
    spec.validate()
        .map_err(|e| SynthError::InvalidOptions(e.to_string()))?;
    let io = |p: &Path, e: std::io::Error| SynthError::Io(format!("{}: {e}", p.display()));
    for sub in ["images", "masks"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| io(&d, e))?;
    }
    let scenes = (0..opts.count)
        .into_par_iter()
        .map(|i| {
            let recipe = SceneRecipe {
                seed: scene_seed(opts.seed, i),
                frame: opts.frame,
                augment: opts.augmented,
            };
            let scene = generate_scene(spec, &opts.scene, &recipe)?;
            let id = scene_id(i);
            let image = format!("images/{id}.png");
            let mask = format!("masks/{id}.png");
            scene.image.save_png(&out_dir.join(&image))?;
            scene.gt_mask.save_png(&out_dir.join(&mask))?;
            Ok(SceneAnnotation {
                id,
                image,
                mask,
                ..scene.annotation
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = Manifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            seed: opts.seed,
            count: opts.count,
            frame: opts.frame,
            augmented: opts.augmented,
            scene: opts.scene,
            keyspec: spec.clone(),
        },
        scenes,
    };
    manifest.save(&manifest_path(out_dir))?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.jsonl")
}
