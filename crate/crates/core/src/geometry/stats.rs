use serde::{Deserialize, Serialize};

use super::PerspectiveParams;

/// Per-parameter mean and standard deviation over a set of transforms.
///
/// Components whose standard deviation is zero or not finite are replaced by
/// 1 and marked in `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub mean: [f64; 8],
    pub std: [f64; 8],
    #[serde(default, skip_serializing_if = "no_degenerate")]
    pub degenerate: [bool; 8],
}

fn no_degenerate(flags: &[bool; 8]) -> bool {
    !flags.iter().any(|&f| f)
}

impl Default for ParamStats {
    fn default() -> Self {
        Self {
            mean: [0.0; 8],
            std: [1.0; 8],
            degenerate: [false; 8],
        }
    }
}

impl ParamStats {
    pub fn new(mean: [f64; 8], std: [f64; 8]) -> Self {
        let mut s = Self {
            mean,
            std,
            degenerate: [false; 8],
        };
        s.sanitize();
        s
    }

    /// Population statistics over `samples`; an empty slice gives the default.
    pub fn from_samples(samples: &[PerspectiveParams]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mut mean = [0.0; 8];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.theta) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 8];
        for s in samples {
            for i in 0..8 {
                let d = s.theta[i] - mean[i];
                var[i] += d * d;
            }
        }
        Self::new(mean, var.map(|v| (v / n).sqrt()))
    }

    fn sanitize(&mut self) {
        for i in 0..8 {
            if !(self.std[i].is_finite() && self.std[i] > 0.0) {
                self.std[i] = 1.0;
                self.degenerate[i] = true;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialise")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        let raw: ParamStats = serde_json::from_str(s)?;
        let mut out = Self::new(raw.mean, raw.std);
        for (d, r) in out.degenerate.iter_mut().zip(raw.degenerate) {
            *d |= r;
        }
        Ok(out)
    }
}

pub fn normalize_params(p: &PerspectiveParams, s: &ParamStats) -> [f64; 8] {
    std::array::from_fn(|i| (p.theta[i] - s.mean[i]) / s.std[i])
}

pub fn denormalize_params(z: &[f64; 8], s: &ParamStats) -> PerspectiveParams {
    PerspectiveParams::new(std::array::from_fn(|i| z[i] * s.std[i] + s.mean[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_maps_to_zero() {
        let s = ParamStats::new([1.0, 0.5, 3.0, -1.0, 2.0, 0.0, 0.01, -0.02], [0.5; 8]);
        let z = normalize_params(&PerspectiveParams::new(s.mean), &s);
        assert_eq!(z, [0.0; 8]);
    }

    #[test]
    fn unit_stats_leave_theta_unchanged() {
        let p = PerspectiveParams::new([1.5, -0.25, 7.0, 0.0, 0.75, -3.0, 1e-3, 2e-3]);
        assert_eq!(normalize_params(&p, &ParamStats::default()), p.theta);
    }

    #[test]
    fn degenerate_std_is_sanitised_and_flagged() {
        let samples = vec![PerspectiveParams::identity(); 4];
        let s = ParamStats::from_samples(&samples);
        assert_eq!(s.std, [1.0; 8]);
        assert!(s.degenerate.iter().all(|&d| d));
        let s = ParamStats::new([0.0; 8], [f64::NAN, 2.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.std[2], 1.0);
        assert_eq!(s.degenerate[..3], [true, false, true]);
    }

    #[test]
    fn json_schema_uses_mean_and_std() {
        let s = ParamStats::new([0.0; 8], [2.0; 8]);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["mean"].as_array().unwrap().len(), 8);
        assert_eq!(v["std"][3], 2.0);
        assert!(v.get("degenerate").is_none());
        let back =
            ParamStats::from_json(r#"{"mean":[0,0,0,0,0,0,0,0],"std":[1,1,1,0,1,1,1,1]}"#).unwrap();
        assert!(back.degenerate[3]);
        assert_eq!(back.std[3], 1.0);
    }
}
