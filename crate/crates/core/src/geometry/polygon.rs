//! Simple-polygon utilities: area, simplicity, half-plane clipping and
//! ear-clipping triangulation.

use super::Point2;

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn perimeter(pts: &[Point2]) -> f64 {
    (0..pts.len())
        .map(|i| pts[i].dist(pts[(i + 1) % pts.len()]))
        .sum()
}

#[inline]
fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when the closed ring has no repeated vertices, no zero-length edges
/// and no pair of edges meeting anywhere except at their shared endpoint.
pub fn is_simple(pts: &[Point2]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if pts[i] == pts[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            let adjacent_next = j == i + 1;
            let adjacent_wrap = i == 0 && j == n - 1;
            if adjacent_next || adjacent_wrap {
                // Shared endpoint only: reject a fold back along the same line.
                let (shared, p, q) = if adjacent_next { (b, a, d) } else { (a, b, c) };
                if orient(p, shared, q) == 0.0 {
                    let dot =
                        (p.x - shared.x) * (q.x - shared.x) + (p.y - shared.y) * (q.y - shared.y);
                    if dot > 0.0 {
                        return false;
                    }
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    signed_area(pts) != 0.0
}

/// Sutherland-Hodgman clip of a ring against the half-plane `y <= level`.
///
/// Consecutive points closer than `1e-12` are merged. The result may be a
/// degenerate ring when the true clip has several components; callers check
/// it with [`is_simple`].
pub fn clip_below(pts: &[Point2], level: f64) -> Vec<Point2> {
    let n = pts.len();
    let mut out: Vec<Point2> = Vec::with_capacity(n + 4);
    for i in 0..n {
        let cur = pts[i];
        let next = pts[(i + 1) % n];
        let cur_in = cur.y <= level;
        let next_in = next.y <= level;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = (level - cur.y) / (next.y - cur.y);
            out.push(Point2::new(cur.x + t * (next.x - cur.x), level));
        }
    }
    dedup_ring(out, 1e-12)
}

fn dedup_ring(pts: Vec<Point2>, eps: f64) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_some_and(|q| q.dist(p) <= eps) {
            continue;
        }
        out.push(p);
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= eps {
        out.pop();
    }
    out
}

/// Even-odd point-in-polygon test.
pub fn contains(pts: &[Point2], p: Point2) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Ear-clipping triangulation of a simple counter-clockwise ring.
///
/// Collinear vertices are never used as ear tips, so every triangle has
/// positive area and every ring edge appears in exactly one triangle.
/// Returns `None` when no valid ear can be found.
pub fn triangulate(pts: &[Point2]) -> Option<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let scale = pts
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.x.abs()).max(p.y.abs()))
        .max(1e-300);
    let eps = 1e-14 * scale * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            if orient(a, b, c) <= eps {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = pts[j];
                orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
            });
            if blocked {
                continue;
            }
            tris.push([ia, ib, ic]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            return None;
        }
    }
    let (a, b, c) = (pts[idx[0]], pts[idx[1]], pts[idx[2]]);
    if orient(a, b, c) <= eps {
        return None;
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Some(tris)
}
