use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BittingError;
use crate::geometry::{polygon, Point2};

/// Depth chart: depth index `k` leaves `shallowest_mm - k * increment_mm`
/// of blade material under the cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthChart {
    pub num_depths: u8,
    pub shallowest_mm: f64,
    pub increment_mm: f64,
}

impl DepthChart {
    pub fn height_mm(&self, depth: u8) -> f64 {
        self.shallowest_mm - depth as f64 * self.increment_mm
    }

    pub fn deepest(&self) -> u8 {
        self.num_depths.saturating_sub(1)
    }
}

/// Public manufacturer data for one key type. Units are millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySpec {
    /// Blade cross-section, `[u, v]` with `v` vertical and the bitting edge on top.
    pub keyway: Vec<Point2>,
    pub blade_length_mm: f64,
    /// Uncut height of the bitting edge above the baseline.
    pub blade_height_mm: f64,
    /// Distances of the pin centres from the shoulder.
    pub pin_positions_mm: Vec<f64>,
    pub depth_chart: DepthChart,
    pub macs: u8,
}

impl Default for KeySpec {
    /// A five-pin Yale-style blade with a grooved keyway.
    fn default() -> Self {
        let keyway = [
            [0.2, 0.0],
            [1.8, 0.0],
            [2.1, 1.2],
            [1.6, 2.4],
            [1.6, 3.2],
            [2.1, 4.2],
            [2.1, 5.0],
            [1.6, 6.0],
            [1.6, 6.8],
            [2.0, 7.8],
            [1.7, 8.5],
            [0.6, 8.5],
            [0.3, 7.6],
            [0.3, 6.4],
            [0.0, 5.6],
            [0.0, 4.6],
            [0.5, 3.6],
            [0.5, 2.6],
            [0.0, 1.6],
            [0.0, 0.8],
        ]
        .into_iter()
        .map(Point2::from)
        .collect();
        Self {
            keyway,
            blade_length_mm: 30.0,
            blade_height_mm: 8.5,
            pin_positions_mm: vec![4.0, 9.0, 14.0, 19.0, 24.0],
            depth_chart: DepthChart {
                num_depths: 10,
                shallowest_mm: 8.0,
                increment_mm: 0.6,
            },
            macs: 7,
        }
    }
}

impl KeySpec {
    pub fn pin_count(&self) -> usize {
        self.pin_positions_mm.len()
    }

    pub fn validate(&self) -> Result<(), BittingError> {
        let bad = |msg: String| Err(BittingError::InvalidKeySpec(msg));
        if self.keyway.len() < 3 || !polygon::is_simple(&self.keyway) {
            return bad("keyway polygon is not simple".into());
        }
        if polygon::signed_area(&self.keyway).abs() <= 0.0 {
            return bad("keyway polygon has zero area".into());
        }
        if !(self.blade_length_mm > 0.0 && self.blade_height_mm > 0.0) {
            return bad("blade dimensions must be positive".into());
        }
        if self.pin_positions_mm.is_empty() {
            return bad("no pin positions".into());
        }
        if self.pin_positions_mm.windows(2).any(|w| w[1] <= w[0]) {
            return bad("pin positions must be strictly increasing".into());
        }
        if self
            .pin_positions_mm
            .iter()
            .any(|&p| !(p > 0.0 && p < self.blade_length_mm))
        {
            return bad("pin positions must lie inside the blade".into());
        }
        let chart = &self.depth_chart;
        if chart.num_depths == 0 || !(chart.increment_mm > 0.0) {
            return bad("depth chart needs at least one depth and a positive increment".into());
        }
        if !(chart.height_mm(chart.deepest()) > 0.0) {
            return bad("deepest cut leaves no material".into());
        }
        if chart.shallowest_mm > self.blade_height_mm {
            return bad("shallowest cut is above the blade edge".into());
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, BittingError> {
        let spec: KeySpec =
            serde_json::from_str(s).map_err(|e| BittingError::InvalidKeySpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, BittingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BittingError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("keyspec serialises")
    }

    /// Highest point of the keyway cross-section.
    pub fn keyway_top(&self) -> f64 {
        self.keyway
            .iter()
            .map(|p| p.y)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Shape of the cutter: flat roots with straight flanks, plus the tip chamfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutGeometry {
    pub root_width_mm: f64,
    /// Rise per unit run of the flanks; 1.0 is a 45° ramp.
    pub flank_slope: f64,
    /// Blade height left at the very tip.
    pub tip_height_mm: f64,
}

impl Default for CutGeometry {
    fn default() -> Self {
        Self {
            root_width_mm: 0.8,
            flank_slope: 1.0,
            tip_height_mm: 3.0,
        }
    }
}

/// Remaining blade height at `x_mm` from the shoulder for a cut key.
pub fn edge_height_mm(code: &BittingCode, spec: &KeySpec, cut: &CutGeometry, x_mm: f64) -> f64 {
    let mut h = spec.blade_height_mm;
    h = h.min(cut.tip_height_mm + (spec.blade_length_mm - x_mm) * cut.flank_slope);
    for (&pos, &depth) in spec.pin_positions_mm.iter().zip(&code.depths) {
        let run = ((x_mm - pos).abs() - 0.5 * cut.root_width_mm).max(0.0);
        h = h.min(spec.depth_chart.height_mm(depth) + run * cut.flank_slope);
    }
    h.max(0.0)
}

/// Cut depths, one per pin, 0 = shallowest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BittingCode {
    pub depths: Vec<u8>,
}

impl BittingCode {
    pub fn new(depths: Vec<u8>) -> Self {
        Self { depths }
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Checks length and depth range against `spec` (MACS is checked separately).
    pub fn check_shape(&self, spec: &KeySpec) -> Result<(), BittingError> {
        if self.depths.len() != spec.pin_count() {
            return Err(BittingError::LengthMismatch {
                expected: spec.pin_count(),
                got: self.depths.len(),
            });
        }
        if let Some(&d) = self
            .depths
            .iter()
            .find(|&&d| d >= spec.depth_chart.num_depths)
        {
            return Err(BittingError::DepthOutOfRange(d));
        }
        Ok(())
    }
}

impl fmt::Display for BittingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.depths.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for BittingCode {
    type Err = BittingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let depths = s
            .trim()
            .split('-')
            .map(|t| t.trim().parse::<u8>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BittingError::ParseCode(s.to_string()))?;
        if depths.is_empty() {
            return Err(BittingError::ParseCode(s.to_string()));
        }
        Ok(Self { depths })
    }
}
