use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2};

const W_EPS: f64 = 1e-12;
const DET_EPS: f64 = 1e-12;

/// Eight free parameters of a homography with `H[2][2] = 1`:
///
/// ```text
/// | t0 t1 t2 |
/// | t3 t4 t5 |
/// | t6 t7 1  |
/// ```
///
/// Annotations store the forward map from scene pixels to the normalised
/// patch; warping a scene with these parameters yields the upright patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerspectiveParams {
    pub theta: [f64; 8],
}

impl Default for PerspectiveParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl PerspectiveParams {
    pub const fn identity() -> Self {
        Self {
            theta: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }

    pub const fn new(theta: [f64; 8]) -> Self {
        Self { theta }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new([1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0])
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Self::new([sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let t = &self.theta;
        [[t[0], t[1], t[2]], [t[3], t[4], t[5]], [t[6], t[7], 1.0]]
    }

    /// Rescales a general 3x3 matrix so that `m[2][2] = 1`.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let scale = m[2][2];
        let norm = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !scale.is_finite() || norm == 0.0 || scale.abs() <= DET_EPS * norm {
            return Err(GeometryError::NonInvertibleTransform);
        }
        let p = Self::new([
            m[0][0] / scale,
            m[0][1] / scale,
            m[0][2] / scale,
            m[1][0] / scale,
            m[1][1] / scale,
            m[1][2] / scale,
            m[2][0] / scale,
            m[2][1] / scale,
        ]);
        if p.theta.iter().all(|v| v.is_finite()) {
            Ok(p)
        } else {
            Err(GeometryError::NonInvertibleTransform)
        }
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.matrix())
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() > DET_EPS
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let m = self.matrix();
        let det = det3(&m);
        if !(det.abs() > DET_EPS) {
            return Err(GeometryError::NonInvertibleTransform);
        }
        // Adjugate; the 1/det factor cancels when renormalising.
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Self::from_matrix(adj)
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &PerspectiveParams) -> Result<Self, GeometryError> {
        let a = self.matrix();
        let b = first.matrix();
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self::from_matrix(m)
    }

    pub fn apply(&self, pt: Point2) -> Result<Point2, GeometryError> {
        apply_homography(self, pt)
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn apply_homography(p: &PerspectiveParams, pt: Point2) -> Result<Point2, GeometryError> {
    let t = &p.theta;
    let w = t[6] * pt.x + t[7] * pt.y + 1.0;
    if !(w.abs() >= W_EPS) {
        return Err(GeometryError::PointAtInfinity(w));
    }
    Ok(Point2::new(
        (t[0] * pt.x + t[1] * pt.y + t[2]) / w,
        (t[3] * pt.x + t[4] * pt.y + t[5]) / w,
    ))
}

/// Estimates the homography mapping each `src[i]` onto `dst[i]`.
///
/// Both point sets are first scaled into the unit box (a pure scale keeps
/// `H[2][2] = 1`), the 8x8 linear system is solved by Gaussian elimination
/// with partial pivoting and one round of iterative refinement, and the
/// scale is undone.
pub fn homography_from_correspondences(
    src: &[Point2; 4],
    dst: &[Point2; 4],
) -> Result<PerspectiveParams, GeometryError> {
    if src
        .iter()
        .chain(dst)
        .any(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(GeometryError::DegenerateCorrespondences(
            "non-finite coordinate",
        ));
    }
    check_general_position(src)?;
    check_general_position(dst)?;

    let s_src = unit_scale(src);
    let s_dst = unit_scale(dst);
    let src_n = src.map(|p| Point2::new(p.x * s_src, p.y * s_src));
    let dst_n = dst.map(|p| Point2::new(p.x * s_dst, p.y * s_dst));

    let mut a = [[0.0f64; 8]; 8];
    let mut b = [0.0f64; 8];
    for (i, (s, d)) in src_n.iter().zip(&dst_n).enumerate() {
        a[2 * i] = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -s.x * d.x, -s.y * d.x];
        b[2 * i] = d.x;
        a[2 * i + 1] = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -s.x * d.y, -s.y * d.y];
        b[2 * i + 1] = d.y;
    }

    let mut x = solve8(a, b)?;
    let mut residual = [0.0; 8];
    for i in 0..8 {
        residual[i] = b[i] - (0..8).map(|j| a[i][j] * x[j]).sum::<f64>();
    }
    if let Ok(dx) = solve8(a, residual) {
        for i in 0..8 {
            x[i] += dx[i];
        }
    }

    // Undo the normalisation: H = S_dst^-1 * Hn * S_src.
    let r = 1.0 / s_dst;
    let theta = [
        x[0] * s_src * r,
        x[1] * s_src * r,
        x[2] * r,
        x[3] * s_src * r,
        x[4] * s_src * r,
        x[5] * r,
        x[6] * s_src,
        x[7] * s_src,
    ];
    let p = PerspectiveParams::new(theta);
    if !theta.iter().all(|v| v.is_finite()) || !p.is_invertible() {
        return Err(GeometryError::DegenerateCorrespondences(
            "singular homography",
        ));
    }
    Ok(p)
}

fn unit_scale(pts: &[Point2; 4]) -> f64 {
    let m = pts
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.x.abs()).max(p.y.abs()));
    if m > 0.0 {
        1.0 / m
    } else {
        1.0
    }
}

fn check_general_position(pts: &[Point2; 4]) -> Result<(), GeometryError> {
    let extent = pts
        .iter()
        .flat_map(|p| pts.iter().map(move |q| p.dist(*q)))
        .fold(0.0f64, f64::max);
    if extent == 0.0 {
        return Err(GeometryError::DegenerateCorrespondences(
            "coincident points",
        ));
    }
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        let (a, b, c) = (pts[i], pts[j], pts[k]);
        let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if cross.abs() <= 1e-10 * extent * extent {
            return Err(GeometryError::DegenerateCorrespondences(
                "three points are collinear",
            ));
        }
    }
    Ok(())
}

fn solve8(mut a: [[f64; 8]; 8], mut b: [f64; 8]) -> Result<[f64; 8], GeometryError> {
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-14 * scale {
            return Err(GeometryError::DegenerateCorrespondences("singular system"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..8 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let s: f64 = (row + 1..8).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
