use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Point2, RasterImage};

/// Shoulder and tip of the blade baseline, in pixel-corner coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoints {
    pub shoulder: Point2,
    pub tip: Point2,
}

/// Binary key silhouette (`true` = key) with optional keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    pub keypoints: Option<Keypoints>,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
            keypoints: None,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(
            bits.len(),
            width * height,
            "bit count must equal width * height"
        );
        Self {
            width,
            height,
            bits,
            keypoints: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::from_bits(width, height, bits)
    }

    pub fn with_keypoints(mut self, kp: Keypoints) -> Self {
        self.keypoints = Some(kp);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but `false` outside the raster.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn bbox(&self) -> Option<PixelBox> {
        let mut b: Option<PixelBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = Some(match b {
                        None => PixelBox {
                            x0: x,
                            y0: y,
                            x1: x,
                            y1: y,
                        },
                        Some(b) => PixelBox {
                            x0: b.x0.min(x),
                            y0: b.y0.min(y),
                            x1: b.x1.max(x),
                            y1: b.y1.max(y),
                        },
                    });
                }
            }
        }
        b
    }

    /// Column mirror; keypoints follow (`x -> width - x`).
    pub fn flip_horizontal(&self) -> BitMask {
        let w = self.width;
        let mut out = BitMask::from_fn(w, self.height, |x, y| self.get(w - 1 - x, y));
        out.keypoints = self.keypoints.map(|k| Keypoints {
            shoulder: Point2::new(w as f64 - k.shoulder.x, k.shoulder.y),
            tip: Point2::new(w as f64 - k.tip.x, k.tip.y),
        });
        out
    }

    /// Row mirror; keypoints follow (`y -> height - y`).
    pub fn flip_vertical(&self) -> BitMask {
        let h = self.height;
        let mut out = BitMask::from_fn(self.width, h, |x, y| self.get(x, h - 1 - y));
        out.keypoints = self.keypoints.map(|k| Keypoints {
            shoulder: Point2::new(k.shoulder.x, h as f64 - k.shoulder.y),
            tip: Point2::new(k.tip.x, h as f64 - k.tip.y),
        });
        out
    }

    /// Nearest-neighbour resample onto a `w x h` grid; keypoints are scaled.
    pub fn resize_nearest(&self, w: usize, h: usize) -> BitMask {
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        let mut out = BitMask::from_fn(w, h, |x, y| {
            let src_x = (((x as f64 + 0.5) * sx) as usize).min(self.width - 1);
            let src_y = (((y as f64 + 0.5) * sy) as usize).min(self.height - 1);
            self.get(src_x, src_y)
        });
        out.keypoints = self.keypoints.map(|k| Keypoints {
            shoulder: Point2::new(k.shoulder.x / sx, k.shoulder.y / sy),
            tip: Point2::new(k.tip.x / sx, k.tip.y / sy),
        });
        out
    }

    pub fn to_raster(&self) -> RasterImage {
        let data = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        RasterImage::new(self.width, self.height, 1, data).expect("mask raster size")
    }

    /// Foreground where luminance is at least one half.
    pub fn from_raster(img: &RasterImage) -> BitMask {
        BitMask::from_fn(img.width(), img.height(), |x, y| img.luminance(x, y) >= 0.5)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), GeometryError> {
        let bytes = self
            .bits
            .iter()
            .map(|&b| if b { 255u8 } else { 0 })
            .collect();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .ok_or_else(|| GeometryError::InvalidRaster("mask buffer size".into()))?;
        img.save(path)
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))
    }

    /// Reads a 1-bit or 8-bit PNG; keypoints are not stored and come back `None`.
    pub fn load_png(path: &Path) -> Result<BitMask, GeometryError> {
        Ok(Self::from_raster(&RasterImage::load_png(path)?))
    }
}
