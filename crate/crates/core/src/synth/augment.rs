use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SceneAnnotation, SynthError};
use crate::geometry::{warp_image, PerspectiveParams, Point2, RasterImage};
use crate::metrics::BoxF;

/// Axis-aligned scale about the image centre, then a shift, then an
/// optional left-right mirror of the whole image. A scale above one crops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub flip: bool,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            shift_x: 0.0,
            shift_y: 0.0,
            flip: false,
        }
    }

    /// The image transform (old scene to new scene).
    pub fn transform(&self, width: usize, height: usize) -> PerspectiveParams {
        let (cx, cy) = (0.5 * width as f64, 0.5 * height as f64);
        let s = self.scale;
        let mut tx = cx - s * cx + self.shift_x;
        let ty = cy - s * cy + self.shift_y;
        let mut sx = s;
        if self.flip {
            sx = -s;
            tx = width as f64 - tx;
        }
        PerspectiveParams::new([sx, 0.0, tx, 0.0, s, ty, 0.0, 0.0])
    }
}

/// Mirror of the rectified patch, `x -> P - x`.
fn patch_mirror(patch_size: usize) -> PerspectiveParams {
    PerspectiveParams::new([-1.0, 0.0, patch_size as f64, 0.0, 1.0, 0.0, 0.0, 0.0])
}

/// Applies `params` and rewrites the annotation to match.
///
/// The new `theta` maps the new scene to the patch. When the image is
/// mirrored, `theta` also mirrors the patch and `flip` toggles, so warping
/// by `theta` and then undoing `flip` still gives the upright key. Marker
/// corners are reordered to stay in canonical order under the new `theta`.
pub fn augment_with(
    img: &RasterImage,
    ann: &SceneAnnotation,
    params: &AugmentParams,
) -> Result<(RasterImage, SceneAnnotation), SynthError> {
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(SynthError::InvalidOptions(format!(
            "scale = {}",
            params.scale
        )));
    }
    let (w, h) = (img.width(), img.height());
    let a = params.transform(w, h);
    let a_inv = a.inverse()?;
    let mut out = warp_image(img, &a, w, h)?;
    out.quantize_u8();

    let mut theta = ann.theta.compose(&a_inv)?;
    if params.flip {
        theta = patch_mirror(ann.patch_size).compose(&theta)?;
    }
    let mapped: Vec<Point2> = [
        Point2::new(ann.bbox.x0, ann.bbox.y0),
        Point2::new(ann.bbox.x1, ann.bbox.y1),
    ]
    .iter()
    .map(|p| a.apply(*p))
    .collect::<Result<_, _>>()?;
    let bbox = BoxF::new(
        mapped[0].x.min(mapped[1].x),
        mapped[0].y.min(mapped[1].y),
        mapped[0].x.max(mapped[1].x),
        mapped[0].y.max(mapped[1].y),
    );
    let corners = match ann.corners {
        Some(c) => {
            let moved: Vec<Point2> = c.iter().map(|p| a.apply(*p)).collect::<Result<_, _>>()?;
            let order = if params.flip {
                [1, 0, 3, 2]
            } else {
                [0, 1, 2, 3]
            };
            Some(std::array::from_fn(|i| moved[order[i]]))
        }
        None => None,
    };
    let next = SceneAnnotation {
        bbox,
        theta,
        flip: ann.flip ^ params.flip,
        corners,
        ..ann.clone()
    };
    Ok((out, next))
}

/// Seeded random crop, scale, shift and mirror. Draws are retried up to ten
/// times while the key box would leave the image.
pub fn augment(
    img: &RasterImage,
    ann: &SceneAnnotation,
    seed: u64,
) -> Result<(RasterImage, SceneAnnotation), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width() as f64, img.height() as f64);
    for _ in 0..10 {
        let params = AugmentParams {
            scale: rng.random_range(0.85..=1.15),
            shift_x: rng.random_range(-0.08..=0.08) * w,
            shift_y: rng.random_range(-0.08..=0.08) * h,
            flip: rng.random_bool(0.5),
        };
        let a = params.transform(img.width(), img.height());
        let inside = [
            Point2::new(ann.bbox.x0, ann.bbox.y0),
            Point2::new(ann.bbox.x1, ann.bbox.y1),
        ]
        .iter()
        .all(|p| {
            a.apply(*p)
                .is_ok_and(|q| q.x >= 1.0 && q.y >= 1.0 && q.x <= w - 1.0 && q.y <= h - 1.0)
        });
        if inside {
            let (out, mut next) = augment_with(img, ann, &params)?;
            next.recipe.augment = true;
            return Ok((out, next));
        }
    }
    Err(SynthError::AugmentationClipsKey)
}
