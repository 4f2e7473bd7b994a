use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::bitting::{BitMask, BittingCode};
use crate::geometry::{
    homography_from_correspondences, warp_image, PerspectiveParams, Point2, RasterImage,
};
use crate::metrics::BoxF;

/// Marker-frame corners in the rectified patch, clockwise from top-left.
/// The frame sits 6% of the patch size outside the patch on every side.
pub fn canonical_frame_corners(patch_size: usize) -> [Point2; 4] {
    let p = patch_size as f64;
    let a = 0.06 * p;
    [
        Point2::new(-a, -a),
        Point2::new(p + a, -a),
        Point2::new(p + a, p + a),
        Point2::new(-a, p + a),
    ]
}

/// Side of a square marker and of its black centre, in patch pixels.
fn marker_sides(patch_size: usize) -> (f64, f64) {
    let p = patch_size as f64;
    (0.08 * p, 0.04 * p)
}

/// How a scene was generated; enough to regenerate it bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SceneRecipe {
    pub seed: u64,
    pub frame: bool,
    pub augment: bool,
}

/// Ground truth for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub id: String,
    /// Scene image, relative to the manifest directory.
    pub image: String,
    /// Ground-truth patch mask, relative to the manifest directory.
    pub mask: String,
    /// Key bounding box in scene pixels.
    #[serde(rename = "box")]
    pub bbox: BoxF,
    /// Maps scene pixels to the rectified patch.
    pub theta: PerspectiveParams,
    /// The rectified patch is mirrored left to right.
    pub flip: bool,
    pub code: BittingCode,
    /// Marker-frame corners in the scene, in canonical order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corners: Option<[Point2; 4]>,
    pub patch_size: usize,
    pub width: usize,
    pub height: usize,
    pub recipe: SceneRecipe,
}

/// Scene layout and sampling ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    /// Nominal marker-frame side as a fraction of the shorter scene side.
    pub frame_fraction: f64,
    pub scale_range: (f64, f64),
    pub max_rotation_deg: f64,
    /// Independent corner jitter as a fraction of the frame side.
    pub perspective: f64,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            patch_size: 640,
            frame_fraction: 0.7,
            scale_range: (0.92, 1.05),
            max_rotation_deg: 10.0,
            perspective: 0.02,
        }
    }
}

impl SceneOptions {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 64 || self.height < 64 || self.patch_size < 16 {
            return Err(SynthError::InvalidOptions(
                "scene or patch too small".into(),
            ));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && hi >= lo && self.frame_fraction > 0.0 && self.perspective >= 0.0) {
            return Err(SynthError::InvalidOptions("bad sampling ranges".into()));
        }
        Ok(())
    }
}

/// Dark, smoothly varying background with per-pixel noise.
pub fn random_background(width: usize, height: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grey: f32 = rng.random_range(0.08..0.28);
    let base: [f32; 3] = std::array::from_fn(|_| grey + rng.random_range(-0.04..0.04));
    let mut img = RasterImage::filled(width, height, 3, 0.0);
    let side = width.min(height) as f64;
    let mut field = vec![0.0f32; width * height];
    for _ in 0..6 {
        let (cx, cy) = (
            rng.random_range(0.0..width as f64),
            rng.random_range(0.0..height as f64),
        );
        let sigma = rng.random_range(0.05..0.2) * side;
        let amp: f32 = rng.random_range(-0.06..0.06);
        let gx: Vec<f32> = (0..width)
            .map(|x| (-(x as f64 + 0.5 - cx).powi(2) / (2.0 * sigma * sigma)).exp() as f32)
            .collect();
        for y in 0..height {
            let gy = (-(y as f64 + 0.5 - cy).powi(2) / (2.0 * sigma * sigma)).exp() as f32;
            let row = &mut field[y * width..(y + 1) * width];
            for (f, g) in row.iter_mut().zip(&gx) {
                *f += amp * gy * g;
            }
        }
    }
    let noise = Normal::new(0.0f32, 0.015).unwrap();
    for y in 0..height {
        for x in 0..width {
            let f = field[y * width + x];
            for (c, b) in base.iter().enumerate() {
                img.set(x, y, c, (b + f + noise.sample(&mut rng)).clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// Samples a scene-to-patch homography whose key, frame and markers all
/// fall inside the scene.
pub fn random_scene_theta<R: Rng + ?Sized>(
    opts: &SceneOptions,
    rng: &mut R,
) -> Result<PerspectiveParams, SynthError> {
    opts.validate()?;
    let (w, h) = (opts.width as f64, opts.height as f64);
    let canon = canonical_frame_corners(opts.patch_size);
    for _ in 0..64 {
        let side = opts.frame_fraction
            * w.min(h)
            * rng.random_range(opts.scale_range.0..=opts.scale_range.1);
        let angle = rng.random_range(-1.0..=1.0) * opts.max_rotation_deg.to_radians();
        let centre = Point2::new(
            0.5 * w + rng.random_range(-0.02..=0.02) * w,
            0.5 * h + rng.random_range(-0.02..=0.02) * h,
        );
        let (s, c) = angle.sin_cos();
        let unit = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        let corners: [Point2; 4] = std::array::from_fn(|i| {
            let (ux, uy) = unit[i];
            let jx = rng.random_range(-1.0..=1.0) * opts.perspective * side;
            let jy = rng.random_range(-1.0..=1.0) * opts.perspective * side;
            Point2::new(
                centre.x + side * (c * ux - s * uy) + jx,
                centre.y + side * (s * ux + c * uy) + jy,
            )
        });
        let Ok(theta) = homography_from_correspondences(&corners, &canon) else {
            continue;
        };
        if frame_fits(&theta, opts) {
            return Ok(theta);
        }
    }
    Err(SynthError::KeyOutOfFrame)
}

/// The outer corners of every marker map inside the scene with a 2 px margin.
fn frame_fits(theta: &PerspectiveParams, opts: &SceneOptions) -> bool {
    let Ok(inv) = theta.inverse() else {
        return false;
    };
    let half = 0.5 * marker_sides(opts.patch_size).0;
    canonical_frame_corners(opts.patch_size).iter().all(|c| {
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .all(|&(dx, dy)| {
                inv.apply(Point2::new(c.x + dx * half, c.y + dy * half))
                    .is_ok_and(|p| {
                        p.x >= 2.0
                            && p.y >= 2.0
                            && p.x <= opts.width as f64 - 2.0
                            && p.y <= opts.height as f64 - 2.0
                    })
            })
    })
}

/// Scene-space bounding box of the mask's foreground pixels under `inv`
/// (patch to scene).
pub(crate) fn mask_box_in_scene(mask: &BitMask, inv: &PerspectiveParams) -> Option<BoxF> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut b: Option<BoxF> = None;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            let edge = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| !mask.get_signed(x + dx, y + dy));
            if !edge {
                continue;
            }
            for (cx, cy) in [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)] {
                let p = inv.apply(Point2::new(cx as f64, cy as f64)).ok()?;
                b = Some(match b {
                    None => BoxF::new(p.x, p.y, p.x, p.y),
                    Some(b) => {
                        BoxF::new(b.x0.min(p.x), b.y0.min(p.y), b.x1.max(p.x), b.y1.max(p.y))
                    }
                });
            }
        }
    }
    b
}

/// Places a shaded key into `background`.
///
/// `mask` is the upright key in the rectified patch and `theta` maps scene
/// pixels to that patch. The key gets a flat metal tone with Gaussian
/// noise, is warped into the scene with bilinear coverage, and optionally
/// the four frame markers are drawn (white squares with black centres).
/// Finally sensor noise is added and the image is quantised to 8 bits.
pub fn compose_scene(
    mask: &BitMask,
    code: &BittingCode,
    background: &RasterImage,
    theta: &PerspectiveParams,
    frame: bool,
    seed: u64,
) -> Result<(RasterImage, SceneAnnotation), SynthError> {
    let (w, h, ch) = (
        background.width(),
        background.height(),
        background.channels(),
    );
    let patch_size = mask.width();
    if mask.height() != patch_size {
        return Err(SynthError::InvalidOptions(
            "patch mask must be square".into(),
        ));
    }
    let inv = theta.inverse()?;
    let bbox = mask_box_in_scene(mask, &inv).ok_or(SynthError::KeyOutOfFrame)?;
    if bbox.x0 < 0.0 || bbox.y0 < 0.0 || bbox.x1 > w as f64 || bbox.y1 > h as f64 {
        return Err(SynthError::KeyOutOfFrame);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brightness: f32 = rng.random_range(0.85..1.0);
    let tone: [f32; 3] = if rng.random_bool(0.5) {
        [0.80, 0.68, 0.35]
    } else {
        [0.78, 0.78, 0.80]
    };
    let tone = tone.map(|t| t * brightness);
    let key_noise = Normal::new(0.0f32, 0.03).unwrap();
    let mut key = RasterImage::filled(patch_size, patch_size, ch, 0.0);
    let mut alpha = RasterImage::filled(patch_size, patch_size, 1, 0.0);
    for y in 0..patch_size {
        for x in 0..patch_size {
            if !mask.get(x, y) {
                continue;
            }
            alpha.set(x, y, 0, 1.0);
            let n = key_noise.sample(&mut rng);
            if ch == 1 {
                key.set(
                    x,
                    y,
                    0,
                    (0.299 * tone[0] + 0.587 * tone[1] + 0.114 * tone[2] + n).clamp(0.0, 1.0),
                );
            } else {
                for (c, t) in tone.iter().enumerate() {
                    key.set(x, y, c, (t + n).clamp(0.0, 1.0));
                }
            }
        }
    }
    let key_scene = warp_image(&key, &inv, w, h)?;
    let alpha_scene = warp_image(&alpha, &inv, w, h)?;
    let mut img = background.clone();
    for y in 0..h {
        for x in 0..w {
            let a = alpha_scene.get(x, y, 0);
            if a <= 0.0 {
                continue;
            }
            for c in 0..ch {
                img.set(
                    x,
                    y,
                    c,
                    key_scene.get(x, y, c) + (1.0 - a) * background.get(x, y, c),
                );
            }
        }
    }

    let corners = if frame {
        let canon = canonical_frame_corners(patch_size);
        for c in &canon {
            draw_marker(&mut img, theta, &inv, *c, patch_size);
        }
        let mut out = [Point2::default(); 4];
        for (o, c) in out.iter_mut().zip(&canon) {
            *o = inv.apply(*c)?;
        }
        Some(out)
    } else {
        None
    };

    let sensor = Normal::new(0.0f32, 0.01).unwrap();
    for v in img.data_mut() {
        *v = (*v + sensor.sample(&mut rng)).clamp(0.0, 1.0);
    }
    img.quantize_u8();

    let ann = SceneAnnotation {
        id: String::new(),
        image: String::new(),
        mask: String::new(),
        bbox,
        theta: *theta,
        flip: false,
        code: code.clone(),
        corners,
        patch_size,
        width: w,
        height: h,
        recipe: SceneRecipe {
            seed,
            frame,
            augment: false,
        },
    };
    Ok((img, ann))
}

fn draw_marker(
    img: &mut RasterImage,
    theta: &PerspectiveParams,
    inv: &PerspectiveParams,
    centre: Point2,
    patch_size: usize,
) {
    let (outer, inner) = marker_sides(patch_size);
    let (ho, hi) = (0.5 * outer, 0.5 * inner);
    let quad: Vec<Point2> = [(-ho, -ho), (ho, -ho), (ho, ho), (-ho, ho)]
        .iter()
        .filter_map(|&(dx, dy)| inv.apply(Point2::new(centre.x + dx, centre.y + dy)).ok())
        .collect();
    if quad.len() < 4 {
        return;
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = quad
        .iter()
        .map(|p| p.x)
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(0.0) as usize;
    let y0 = quad
        .iter()
        .map(|p| p.y)
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(0.0) as usize;
    let x1 = quad
        .iter()
        .map(|p| p.x)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(w) as usize;
    let y1 = quad
        .iter()
        .map(|p| p.y)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(h) as usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let (mut cover, mut white) = (0.0f32, 0.0f32);
            for (sx, sy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                let Ok(q) = theta.apply(Point2::new(x as f64 + sx, y as f64 + sy)) else {
                    continue;
                };
                let (dx, dy) = ((q.x - centre.x).abs(), (q.y - centre.y).abs());
                if dx <= ho && dy <= ho {
                    cover += 0.25;
                    if dx > hi || dy > hi {
                        white += 0.25;
                    }
                }
            }
            if cover > 0.0 {
                for c in 0..img.channels() {
                    let v = img.get(x, y, c);
                    img.set(x, y, c, (1.0 - cover) * v + white);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::render_patch_mask;
    use crate::KeySpec;

    fn setup(seed: u64, frame: bool) -> (RasterImage, SceneAnnotation, BitMask) {
        let spec = KeySpec::default();
        let opts = SceneOptions {
            width: 320,
            height: 320,
            patch_size: 200,
            ..SceneOptions::default()
        };
        let code = BittingCode::new(vec![1, 5, 3, 7, 2]);
        let mask = render_patch_mask(&code, &spec, opts.patch_size).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_scene_theta(&opts, &mut rng).unwrap();
        let bg = random_background(opts.width, opts.height, seed);
        let (img, ann) = compose_scene(&mask, &code, &bg, &theta, frame, seed).unwrap();
        (img, ann, mask)
    }

    #[test]
    fn identity_theta_box_is_mask_bbox() {
        let spec = KeySpec::default();
        let code = BittingCode::new(vec![0; 5]);
        let mask = render_patch_mask(&code, &spec, 128).unwrap();
        let bg = RasterImage::filled(128, 128, 3, 0.1);
        let (_, ann) =
            compose_scene(&mask, &code, &bg, &PerspectiveParams::identity(), false, 1).unwrap();
        let b = mask.bbox().unwrap();
        assert_eq!(
            ann.bbox,
            BoxF::new(
                b.x0 as f64,
                b.y0 as f64,
                b.x1 as f64 + 1.0,
                b.y1 as f64 + 1.0
            )
        );
        assert!(ann.corners.is_none());
    }

    #[test]
    fn corners_map_to_canonical_frame() {
        let (_, ann, _) = setup(5, true);
        let canon = canonical_frame_corners(ann.patch_size);
        for (c, k) in ann.corners.unwrap().iter().zip(&canon) {
            assert!(ann.theta.apply(*c).unwrap().dist(*k) < 0.5);
        }
    }

    #[test]
    fn deterministic_and_frame_only_changes_markers() {
        let (a, ann_a, _) = setup(9, true);
        let (b, ann_b, _) = setup(9, true);
        assert_eq!(a, b);
        assert_eq!(ann_a, ann_b);
        let (c, ann_c, _) = setup(9, false);
        assert_eq!(ann_c.theta, ann_a.theta);
        assert_eq!(ann_c.bbox, ann_a.bbox);
        // Markers sit outside the key box, so the box interior is untouched.
        let bx = ann_a.bbox;
        for y in bx.y0.ceil() as usize..bx.y1.floor() as usize {
            for x in bx.x0.ceil() as usize..bx.x1.floor() as usize {
                assert_eq!(a.pixel(x, y), c.pixel(x, y));
            }
        }
        assert_ne!(a, c);
    }

    #[test]
    fn rectified_scene_segments_to_the_mask() {
        let (img, ann, mask) = setup(21, true);
        let patch = warp_image(&img, &ann.theta, ann.patch_size, ann.patch_size).unwrap();
        let seg = crate::bitting::segment_threshold(&patch).unwrap();
        let inter = (0..mask.height())
            .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| seg.get(x, y) && mask.get(x, y))
            .count();
        assert!(inter as f64 / seg.count() as f64 > 0.98);
        assert!(inter as f64 / mask.count() as f64 > 0.98);
    }

    #[test]
    fn key_outside_scene_is_rejected() {
        let spec = KeySpec::default();
        let code = BittingCode::new(vec![0; 5]);
        let mask = render_patch_mask(&code, &spec, 128).unwrap();
        let bg = RasterImage::filled(64, 64, 3, 0.1);
        assert!(matches!(
            compose_scene(&mask, &code, &bg, &PerspectiveParams::identity(), false, 1),
            Err(SynthError::KeyOutOfFrame)
        ));
    }
}
