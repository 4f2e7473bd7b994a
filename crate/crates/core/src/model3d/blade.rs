use super::{HeightProfile, ModelError, TriMesh};
use crate::bitting::KeySpec;
use crate::geometry::{polygon, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BladeOptions {
    pub stations: usize,
    pub ring: usize,
}

impl Default for BladeOptions {
    fn default() -> Self {
        Self {
            stations: 256,
            ring: 128,
        }
    }
}

/// Sweeps the keyway along the blade, clipped at each station by `v <= h(x)`.
///
/// Every station's cross-section is resampled to `ring` vertices. Original
/// polygon corners are kept, so straight-sided sections are reproduced
/// exactly, and all rings start on the left boundary at a fixed height. The
/// rings are stitched with split quads and the two ends capped.
pub fn build_blade_mesh(
    spec: &KeySpec,
    profile: &HeightProfile,
    stations: usize,
    ring: usize,
) -> Result<TriMesh, ModelError> {
    if stations < 2 {
        return Err(ModelError::InvalidParameters(format!(
            "stations = {stations}, need at least 2"
        )));
    }
    if ring < 8 {
        return Err(ModelError::InvalidParameters(format!(
            "ring = {ring}, need at least 8"
        )));
    }
    let mut keyway = spec.keyway.clone();
    if polygon::signed_area(&keyway) < 0.0 {
        keyway.reverse();
    }
    let bottom = keyway.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let top = spec.keyway_top();
    let length = spec.blade_length_mm;

    let xs: Vec<f64> = (0..stations)
        .map(|j| length * j as f64 / (stations - 1) as f64)
        .collect();
    let mut levels = Vec::with_capacity(stations);
    let mut clamped = 0usize;
    for &x in &xs {
        let h = profile.eval(x);
        if h > top {
            clamped += 1;
        }
        levels.push(h.min(top));
    }
    if clamped > 0 {
        log::warn!(
            "height profile exceeds the keyway top at {clamped} stations; clamped to {top} mm"
        );
    }
    let lowest = levels.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lowest > bottom) {
        return Err(ModelError::InvalidProfile(
            "profile reaches the keyway bottom".into(),
        ));
    }
    let start_level = bottom + 0.25 * (lowest - bottom);

    let mut rings = Vec::with_capacity(stations);
    for (&x, &h) in xs.iter().zip(&levels) {
        let section = if h >= top {
            keyway.clone()
        } else {
            polygon::clip_below(&keyway, h)
        };
        if section.len() < 3
            || !polygon::is_simple(&section)
            || polygon::signed_area(&section) <= 0.0
        {
            return Err(ModelError::ClipNotSimple { x_mm: x });
        }
        let section = start_at_left_crossing(&section, start_level)
            .ok_or(ModelError::ClipNotSimple { x_mm: x })?;
        rings.push((x, resample_ring(&section, ring)));
    }
    sweep_rings(&rings)
}

/// Rotates a CCW ring so it starts at the left-most crossing of `y = level`,
/// inserting that point as a vertex if needed.
fn start_at_left_crossing(ring: &[Point2], level: f64) -> Option<Vec<Point2>> {
    let n = ring.len();
    let mut best: Option<(f64, usize, Point2)> = None;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let crosses = (a.y <= level && b.y > level) || (a.y > level && b.y <= level);
        if !crosses {
            continue;
        }
        let t = (level - a.y) / (b.y - a.y);
        let p = Point2::new(a.x + t * (b.x - a.x), level);
        if best.is_none_or(|(u, _, _)| p.x < u) {
            best = Some((p.x, i, p));
        }
    }
    let (_, edge, p) = best?;
    let mut out = Vec::with_capacity(n + 1);
    let next = (edge + 1) % n;
    let (a, b) = (ring[edge], ring[next]);
    if p.dist(b) <= 1e-12 {
        out.extend((0..n).map(|k| ring[(next + k) % n]));
    } else if p.dist(a) <= 1e-12 {
        out.extend((0..n).map(|k| ring[(edge + k) % n]));
    } else {
        out.push(p);
        out.extend((0..n).map(|k| ring[(next + k) % n]));
    }
    Some(out)
}

/// Resamples a closed ring to exactly `count` vertices, starting at `ring[0]`.
///
/// When `count` is at least the vertex count all original vertices are
/// kept and the extra points are spread over the edges by length (largest
/// remainder). Otherwise the ring is sampled uniformly by arc length.
fn resample_ring(ring: &[Point2], count: usize) -> Vec<Point2> {
    let n = ring.len();
    let lengths: Vec<f64> = (0..n).map(|i| ring[i].dist(ring[(i + 1) % n])).collect();
    let total: f64 = lengths.iter().sum();
    if count < n {
        let mut out = Vec::with_capacity(count);
        let mut edge = 0usize;
        let mut acc = 0.0;
        for k in 0..count {
            let s = total * k as f64 / count as f64;
            while edge < n - 1 && acc + lengths[edge] < s {
                acc += lengths[edge];
                edge += 1;
            }
            let t = if lengths[edge] > 0.0 {
                ((s - acc) / lengths[edge]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            out.push(lerp(ring[edge], ring[(edge + 1) % n], t));
        }
        return out;
    }

    let extra = count - n;
    let quotas: Vec<f64> = lengths.iter().map(|l| extra as f64 * l / total).collect();
    let mut per_edge: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = extra - per_edge.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        per_edge[i] += 1;
        left -= 1;
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        out.push(a);
        let k = per_edge[i];
        for s in 1..=k {
            out.push(lerp(a, b, s as f64 / (k + 1) as f64));
        }
    }
    out
}

fn lerp(a: Point2, b: Point2, t: f64) -> Point2 {
    Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

/// Stitches equal-length CCW `(u, v)` rings placed at increasing `x` into a
/// closed shell: quads split along one diagonal, ends capped by ear clipping.
pub fn sweep_rings(rings: &[(f64, Vec<Point2>)]) -> Result<TriMesh, ModelError> {
    if rings.len() < 2 {
        return Err(ModelError::InvalidParameters(
            "a sweep needs at least two rings".into(),
        ));
    }
    let m = rings[0].1.len();
    if m < 3 || rings.iter().any(|(_, r)| r.len() != m) {
        return Err(ModelError::InvalidParameters(
            "rings must share a vertex count of at least 3".into(),
        ));
    }
    let mut mesh = TriMesh::default();
    mesh.vertices.reserve(rings.len() * m);
    for (x, r) in rings {
        mesh.vertices.extend(r.iter().map(|p| [*x, p.x, p.y]));
    }
    let id = |j: usize, i: usize| (j * m + i % m) as u32;
    for j in 0..rings.len() - 1 {
        for i in 0..m {
            let (a, b, c, d) = (id(j, i), id(j, i + 1), id(j + 1, i + 1), id(j + 1, i));
            mesh.triangles.push([a, b, c]);
            mesh.triangles.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    let first_cap =
        polygon::triangulate(&rings[0].1).ok_or(ModelError::Triangulation { x_mm: rings[0].0 })?;
    let last_cap = polygon::triangulate(&rings[last].1).ok_or(ModelError::Triangulation {
        x_mm: rings[last].0,
    })?;
    for t in first_cap {
        mesh.triangles.push([id(0, t[0]), id(0, t[2]), id(0, t[1])]);
    }
    for t in last_cap {
        mesh.triangles
            .push([id(last, t[0]), id(last, t[1]), id(last, t[2])]);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model3d::mesh_diagnostics;

    fn box_spec(w: f64, h: f64, l: f64) -> KeySpec {
        KeySpec {
            keyway: vec![
                Point2::new(0.0, 0.0),
                Point2::new(w, 0.0),
                Point2::new(w, h),
                Point2::new(0.0, h),
            ],
            blade_length_mm: l,
            blade_height_mm: h,
            ..KeySpec::default()
        }
    }

    #[test]
    fn rectangular_keyway_makes_an_exact_box() {
        let spec = box_spec(2.0, 8.5, 30.0);
        let profile = HeightProfile::constant(30.0, 8.5).unwrap();
        let mesh = build_blade_mesh(&spec, &profile, 5, 16).unwrap();
        let d = mesh_diagnostics(&mesh);
        assert!(d.watertight);
        assert_eq!(d.euler, 2);
        assert_eq!(d.degenerate_triangles, 0);
        assert!(
            (d.volume_mm3 - 2.0 * 8.5 * 30.0).abs() < 1e-9,
            "{}",
            d.volume_mm3
        );
    }

    #[test]
    fn resampling_keeps_corners_and_count() {
        let sq = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let r = resample_ring(&sq, 10);
        assert_eq!(r.len(), 10);
        for c in &sq {
            assert!(r.contains(c));
        }
        assert!((polygon::signed_area(&r) - 1.0).abs() < 1e-15);
        let coarse = resample_ring(&sq, 3);
        assert_eq!(coarse.len(), 3);
    }

    #[test]
    fn start_vertex_is_on_the_left() {
        let sq = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let r = start_at_left_crossing(&sq, 0.25).unwrap();
        assert_eq!(r[0], Point2::new(0.0, 0.25));
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn parameter_checks() {
        let spec = KeySpec::default();
        let p = HeightProfile::constant(30.0, 8.0).unwrap();
        assert!(matches!(
            build_blade_mesh(&spec, &p, 1, 64),
            Err(ModelError::InvalidParameters(_))
        ));
        assert!(matches!(
            build_blade_mesh(&spec, &p, 8, 4),
            Err(ModelError::InvalidParameters(_))
        ));
    }

    #[test]
    fn arch_keyway_clip_is_rejected() {
        let spec = KeySpec {
            keyway: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 6.0),
                Point2::new(2.0, 6.0),
                Point2::new(2.0, 0.0),
                Point2::new(3.0, 0.0),
                Point2::new(3.0, 8.5),
                Point2::new(0.0, 8.5),
            ],
            ..KeySpec::default()
        };
        let p = HeightProfile::constant(30.0, 4.0).unwrap();
        assert!(matches!(
            build_blade_mesh(&spec, &p, 8, 64),
            Err(ModelError::ClipNotSimple { .. })
        ));
    }
}
