use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::bitting::{edge_height_mm, BittingCode, CutGeometry, KeySpec, Keypoints};

/// Piecewise-linear blade height `h(x)` over `[0, blade_length]`, in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightProfile {
    knots: Vec<(f64, f64)>,
}

impl HeightProfile {
    /// Knots must be strictly increasing in `x` with positive heights.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if knots.len() < 2 {
            return Err(ModelError::InvalidProfile("need at least two knots".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(ModelError::InvalidProfile(
                "knots must be strictly increasing".into(),
            ));
        }
        if knots
            .iter()
            .any(|&(x, h)| !x.is_finite() || !(h > 0.0) || !h.is_finite())
        {
            return Err(ModelError::InvalidProfile(
                "heights must be positive and finite".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn constant(length_mm: f64, height_mm: f64) -> Result<Self, ModelError> {
        Self::new(vec![(0.0, height_mm), (length_mm, height_mm)])
    }

    /// Samples the cut geometry of `code` at `stations` uniform positions.
    pub fn from_code(
        code: &BittingCode,
        spec: &KeySpec,
        cut: &CutGeometry,
        stations: usize,
    ) -> Result<Self, ModelError> {
        let n = stations.max(2);
        let knots = (0..n)
            .map(|j| {
                let x = spec.blade_length_mm * j as f64 / (n - 1) as f64;
                (x, edge_height_mm(code, spec, cut, x).max(min_height(spec)))
            })
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn start(&self) -> f64 {
        self.knots[0].0
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Linear interpolation, clamped to the end knots outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(kx, _)| kx <= x);
        let (x0, h0) = k[i - 1];
        let (x1, h1) = k[i];
        h0 + (h1 - h0) * (x - x0) / (x1 - x0)
    }

    pub fn min_height(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_mm,h_mm\n");
        for (x, h) in &self.knots {
            s.push_str(&format!("{x},{h}\n"));
        }
        s
    }
}

fn min_height(spec: &KeySpec) -> f64 {
    1e-3 * spec.blade_height_mm
}

/// Maps a traced boundary to a height profile.
///
/// Pixels map to millimetres by the similarity fixing the shoulder at
/// `x = 0` and the tip at `x = blade_length`, with the baseline at height 0.
/// Each of `stations` uniform stations takes the highest boundary point
/// (pixel top edge) within half a station spacing; stations with no boundary
/// point are interpolated from their neighbours. Heights are clamped to
/// `(0, blade_height]`.
pub fn bitting_height_profile(
    boundary: &[(usize, usize)],
    keypoints: &Keypoints,
    spec: &KeySpec,
    stations: usize,
) -> Result<HeightProfile, ModelError> {
    if boundary.is_empty() {
        return Err(ModelError::EmptyBoundary);
    }
    let blade_px = keypoints.tip.x - keypoints.shoulder.x;
    if !(blade_px.abs() >= 1.0) {
        return Err(ModelError::DegenerateBlade);
    }
    let n = stations.max(2);
    let length = spec.blade_length_mm;
    let mm_per_px = length / blade_px;
    let spacing = length / (n - 1) as f64;

    let mut best: Vec<Option<f64>> = vec![None; n];
    for &(c, r) in boundary {
        let x = (c as f64 + 0.5 - keypoints.shoulder.x) * mm_per_px;
        let h = (keypoints.shoulder.y - r as f64) * mm_per_px;
        let j = (x / spacing).round();
        if j < 0.0 || j >= n as f64 {
            continue;
        }
        let j = j as usize;
        if (x - j as f64 * spacing).abs() <= 0.5 * spacing {
            best[j] = Some(best[j].map_or(h, |b: f64| b.max(h)));
        }
    }
    let known: Vec<usize> = (0..n).filter(|&j| best[j].is_some()).collect();
    if known.is_empty() {
        return Err(ModelError::EmptyBoundary);
    }
    let lo = min_height(spec);
    let knots = (0..n)
        .map(|j| {
            let h = match best[j] {
                Some(h) => h,
                None => {
                    let after = known.partition_point(|&k| k < j);
                    match (
                        after.checked_sub(1).map(|i| known[i]),
                        known.get(after).copied(),
                    ) {
                        (Some(a), Some(b)) => {
                            let (ha, hb) = (best[a].unwrap(), best[b].unwrap());
                            ha + (hb - ha) * (j - a) as f64 / (b - a) as f64
                        }
                        (Some(a), None) => best[a].unwrap(),
                        (None, Some(b)) => best[b].unwrap(),
                        (None, None) => unreachable!(),
                    }
                }
            };
            (j as f64 * spacing, h.clamp(lo, spec.blade_height_mm))
        })
        .collect();
    HeightProfile::new(knots)
}
