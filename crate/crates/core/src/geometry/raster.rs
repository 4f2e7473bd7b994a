use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use super::GeometryError;

/// Row-major image with 1 or 3 channels and samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, GeometryError> {
        if channels != 1 && channels != 3 {
            return Err(GeometryError::InvalidRaster(format!(
                "unsupported channel count {channels}"
            )));
        }
        if width * height * channels != data.len() {
            return Err(GeometryError::InvalidRaster(format!(
                "{width}x{height}x{channels} does not match {} samples",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(
            channels == 1 || channels == 3,
            "unsupported channel count {channels}"
        );
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Luma (Rec. 601 weights) or the single channel.
    pub fn luminance(&self, x: usize, y: usize) -> f32 {
        let px = self.pixel(x, y);
        if self.channels == 1 {
            px[0]
        } else {
            0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]
        }
    }

    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                data.push(self.luminance(x, y));
            }
        }
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Rounds every sample to the nearest 8-bit level, as a PNG round trip would.
    pub fn quantize_u8(&mut self) {
        for v in &mut self.data {
            *v = to_u8(*v) as f32 / 255.0;
        }
    }

    pub fn load_png(path: &Path) -> Result<Self, GeometryError> {
        let img =
            image::open(path).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_dynamic(img))
    }

    pub fn from_dynamic(img: image::DynamicImage) -> Self {
        use image::DynamicImage as D;
        match img {
            D::ImageLuma8(g) => Self::from_gray8(&g),
            D::ImageLumaA8(_) | D::ImageLuma16(_) | D::ImageLumaA16(_) => {
                Self::from_gray8(&img.to_luma8())
            }
            other => {
                let rgb = other.to_rgb8();
                let data = rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
                RasterImage {
                    width: rgb.width() as usize,
                    height: rgb.height() as usize,
                    channels: 3,
                    data,
                }
            }
        }
    }

    fn from_gray8(g: &GrayImage) -> Self {
        RasterImage {
            width: g.width() as usize,
            height: g.height() as usize,
            channels: 1,
            data: g.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), GeometryError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| to_u8(v)).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let res = if self.channels == 1 {
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).map(|img| img.save(path))
        } else {
            RgbImage::from_raw(w, h, bytes).map(|img: ImageBuffer<Rgb<u8>, _>| img.save(path))
        };
        match res {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(GeometryError::Io(format!("{}: {e}", path.display()))),
            None => Err(GeometryError::InvalidRaster("buffer size mismatch".into())),
        }
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
