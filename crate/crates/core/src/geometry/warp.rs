use super::{GeometryError, PerspectiveParams, RasterImage};

/// Warps `img` by `p` (source -> output) into an `out_w x out_h` raster.
///
/// Each output pixel samples the source at `p^-1` of its centre with bilinear
/// interpolation; samples outside the source read as 0.
pub fn warp_image(
    img: &RasterImage,
    p: &PerspectiveParams,
    out_w: usize,
    out_h: usize,
) -> Result<RasterImage, GeometryError> {
    if out_w == 0 || out_h == 0 {
        return Err(GeometryError::EmptyOutput);
    }
    let inv = p.inverse()?;
    let t = inv.theta;
    let ch = img.channels();
    let mut out = RasterImage::filled(out_w, out_h, ch, 0.0);
    let mut px = [0.0f32; 3];
    for v in 0..out_h {
        let yc = v as f64 + 0.5;
        for u in 0..out_w {
            let xc = u as f64 + 0.5;
            let w = t[6] * xc + t[7] * yc + 1.0;
            if w.abs() < 1e-12 {
                continue;
            }
            let sx = (t[0] * xc + t[1] * yc + t[2]) / w - 0.5;
            let sy = (t[3] * xc + t[4] * yc + t[5]) / w - 0.5;
            if bilinear(img, sx, sy, &mut px[..ch]) {
                for (c, &val) in px[..ch].iter().enumerate() {
                    out.set(u, v, c, val);
                }
            }
        }
    }
    Ok(out)
}

/// Bilinear sample at sample-index coordinates with zero padding.
/// Returns false when the footprint misses the image entirely.
pub(crate) fn bilinear(img: &RasterImage, sx: f64, sy: f64, out: &mut [f32]) -> bool {
    if !sx.is_finite() || !sy.is_finite() {
        return false;
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0f = sx.floor();
    let y0f = sy.floor();
    if x0f < -1.0 || y0f < -1.0 || x0f >= w as f64 || y0f >= h as f64 {
        return false;
    }
    let (x0, y0) = (x0f as i64, y0f as i64);
    let fx = (sx - x0f) as f32;
    let fy = (sy - y0f) as f32;
    let ch = img.channels();
    let fetch = |x: i64, y: i64, c: usize| -> f32 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            img.get(x as usize, y as usize, c)
        }
    };
    for (c, o) in out.iter_mut().enumerate().take(ch) {
        let top = fetch(x0, y0, c) * (1.0 - fx) + fetch(x0 + 1, y0, c) * fx;
        let bottom = fetch(x0, y0 + 1, c) * (1.0 - fx) + fetch(x0 + 1, y0 + 1, c) * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
    true
}

/// Column-mirrored copy.
pub fn flip_horizontal(img: &RasterImage) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                out.set(x, y, c, img.get(w - 1 - x, y, c));
            }
        }
    }
    out
}

/// Row-mirrored copy.
pub fn flip_vertical(img: &RasterImage) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                out.set(x, y, c, img.get(x, h - 1 - y, c));
            }
        }
    }
    out
}
