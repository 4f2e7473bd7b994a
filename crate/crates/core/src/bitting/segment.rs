//! Global-threshold segmentation: Otsu threshold, largest 4-connected
//! component, hole filling.

use std::collections::VecDeque;

use super::{BitMask, BittingError};
use crate::geometry::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOptions {
    /// Minimum gap between the two class means (intensity units). Below it
    /// the patch is treated as background only.
    pub min_contrast: f32,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self { min_contrast: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub mask: BitMask,
    /// Foreground is luminance above `threshold`.
    pub threshold: f32,
    /// Between-class over total variance, in `[0, 1]`.
    pub separability: f64,
    pub contrast: f32,
}

pub fn segment_threshold(patch: &RasterImage) -> Result<BitMask, BittingError> {
    segment_threshold_with(patch, &SegmentOptions::default()).map(|s| s.mask)
}

pub fn segment_threshold_with(
    patch: &RasterImage,
    opts: &SegmentOptions,
) -> Result<Segmentation, BittingError> {
    let (w, h) = (patch.width(), patch.height());
    if w == 0 || h == 0 {
        return Err(BittingError::NoForeground);
    }
    let lum: Vec<f32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| patch.luminance(x, y).clamp(0.0, 1.0))
        .collect();

    let mut hist = [0u64; 256];
    for &v in &lum {
        hist[bin(v)] += 1;
    }
    let (t, separability) = otsu(&hist).ok_or(BittingError::NoForeground)?;

    let (mut s_lo, mut n_lo, mut s_hi, mut n_hi) = (0.0f64, 0u64, 0.0f64, 0u64);
    for (i, &c) in hist.iter().enumerate() {
        if i <= t {
            s_lo += c as f64 * i as f64;
            n_lo += c;
        } else {
            s_hi += c as f64 * i as f64;
            n_hi += c;
        }
    }
    if n_lo == 0 || n_hi == 0 {
        return Err(BittingError::NoForeground);
    }
    let contrast = ((s_hi / n_hi as f64 - s_lo / n_lo as f64) / 255.0) as f32;
    if contrast < opts.min_contrast {
        return Err(BittingError::NoForeground);
    }

    let raw = BitMask::from_bits(w, h, lum.iter().map(|&v| bin(v) > t).collect());
    let mask = fill_holes(&largest_component(&raw).ok_or(BittingError::NoForeground)?);
    Ok(Segmentation {
        mask,
        threshold: (t as f32 + 0.5) / 255.0,
        separability,
        contrast,
    })
}

#[inline]
fn bin(v: f32) -> usize {
    (v * 255.0).round() as usize
}

/// Otsu's threshold: the last bin of the dark class maximising between-class
/// variance, with the separability ratio.
fn otsu(hist: &[u64; 256]) -> Option<(usize, f64)> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let n = total as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mean = sum_all / n;
    let var_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 * (i as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let (mut w0, mut s0) = (0.0f64, 0.0f64);
    let mut best: Option<(usize, f64)> = None;
    for (t, &c) in hist.iter().enumerate().take(255) {
        w0 += c as f64;
        s0 += t as f64 * c as f64;
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (sum_all - s0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1) / (n * n);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((t, between));
        }
    }
    best.map(|(t, b)| {
        (
            t,
            if var_total > 0.0 {
                (b / var_total).min(1.0)
            } else {
                0.0
            },
        )
    })
}

/// Keeps the largest 4-connected foreground component (first in scan order
/// on ties). `None` for an empty mask.
pub(crate) fn largest_component(mask: &BitMask) -> Option<BitMask> {
    let (labels, sizes) = label_components(mask);
    let (best, _) =
        sizes
            .iter()
            .enumerate()
            .fold(None::<(usize, usize)>, |acc, (i, &s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((i, s)),
            })?;
    let keep = best as u32 + 1;
    Some(BitMask::from_bits(
        mask.width(),
        mask.height(),
        labels.iter().map(|&l| l == keep).collect(),
    ))
}

/// 4-connected labelling; label 0 is background, components are 1-based.
pub(crate) fn label_components(mask: &BitMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Sets every background pixel not 4-reachable from the border.
pub(crate) fn fill_holes(mask: &BitMask) -> BitMask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |i: usize, outside: &mut Vec<bool>, q: &mut VecDeque<usize>| {
        if !mask.bits()[i] && !outside[i] {
            outside[i] = true;
            q.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut queue);
        seed((h - 1) * w + x, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut queue);
        seed(y * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let neighbours = [
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y > 0).then(|| i - w),
            (y + 1 < h).then(|| i + w),
        ];
        for j in neighbours.into_iter().flatten() {
            if !mask.bits()[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        }
    }
    let mut out = BitMask::from_bits(w, h, outside.iter().map(|&o| !o).collect());
    out.keypoints = mask.keypoints;
    out
}
