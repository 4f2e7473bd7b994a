#![allow(clippy::needless_range_loop)]

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use keyforge::metrics::{BoxF, Detection};
use keyforge::Point2;
use num::{BigRational, FromPrimitive, ToPrimitive, Zero};

/// Solves the eight-unknown homography system in exact rational arithmetic.
/// Inputs are converted exactly, so the only rounding is the final
/// conversion back to `f64`.
pub fn exact_homography(src: &[Point2; 4], dst: &[Point2; 4]) -> Option<[f64; 8]> {
    let q = |v: f64| BigRational::from_f64(v).expect("finite");
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(8);
    for (s, d) in src.iter().zip(dst) {
        let (x, y, u, v) = (q(s.x), q(s.y), q(d.x), q(d.y));
        let one = BigRational::from_integer(1.into());
        let zero = BigRational::zero();
        rows.push(vec![
            x.clone(),
            y.clone(),
            one.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
            -(&x * &u),
            -(&y * &u),
            u.clone(),
        ]);
        rows.push(vec![
            zero.clone(),
            zero.clone(),
            zero,
            x.clone(),
            y.clone(),
            one,
            -(&x * &v),
            -(&y * &v),
            v,
        ]);
    }
    for col in 0..8 {
        let pivot = (col..8).find(|&r| !rows[r][col].is_zero())?;
        rows.swap(col, pivot);
        let p = rows[col][col].clone();
        for k in col..9 {
            rows[col][k] = &rows[col][k] / &p;
        }
        for r in 0..8 {
            if r != col && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for k in col..9 {
                    let t = &f * &rows[col][k];
                    rows[r][k] -= t;
                }
            }
        }
    }
    let mut out = [0.0; 8];
    for (i, o) in out.iter_mut().enumerate() {
        *o = rows[i][8].to_f64()?;
    }
    Some(out)
}

/// Applies the 8 parameters (with `h22 = 1`) directly.
pub fn apply8(t: &[f64; 8], p: Point2) -> Point2 {
    let w = t[6] * p.x + t[7] * p.y + 1.0;
    Point2::new(
        (t[0] * p.x + t[1] * p.y + t[2]) / w,
        (t[3] * p.x + t[4] * p.y + t[5]) / w,
    )
}

pub fn iou_oracle(a: &BoxF, b: &BoxF) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let area = |r: &BoxF| (r.x1 - r.x0).max(0.0) * (r.y1 - r.y0).max(0.0);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Re-derives the true-positive flags from scratch for every ranked prefix,
/// then averages over recall levels `j = 1..G` the best precision reached at
/// recall at least `j / G`.
pub fn ap_oracle(dets: &[Detection], gts: &BTreeMap<String, Vec<BoxF>>, thr: f64) -> f64 {
    let g: usize = gts.values().map(Vec::len).sum();
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // Insertion sort: stable, descending score.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && dets[order[j]].score > dets[order[j - 1]].score {
            order.swap(j, j - 1);
            j -= 1;
        }
    }
    let ranked: Vec<&Detection> = order.iter().map(|&i| &dets[i]).collect();
    let mut tp_at = Vec::new();
    let mut prec_at = Vec::new();
    for k in 1..=ranked.len() {
        let mut taken: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
        let mut tp = 0usize;
        for d in &ranked[..k] {
            let Some(boxes) = gts.get(&d.image_id) else {
                continue;
            };
            let used = taken
                .entry(d.image_id.as_str())
                .or_insert_with(|| vec![false; boxes.len()]);
            let mut best = None;
            let mut best_iou = f64::NEG_INFINITY;
            for (j, b) in boxes.iter().enumerate() {
                let iou = iou_oracle(&d.bbox, b);
                if !used[j] && iou >= thr && iou > best_iou {
                    best = Some(j);
                    best_iou = iou;
                }
            }
            if let Some(j) = best {
                used[j] = true;
                tp += 1;
            }
        }
        tp_at.push(tp);
        prec_at.push(tp as f64 / k as f64);
    }
    let total_tp = tp_at.last().copied().unwrap_or(0);
    let mut sum = 0.0;
    for j in 1..=total_tp {
        let best = (0..tp_at.len())
            .filter(|&k| tp_at[k] >= j)
            .map(|k| prec_at[k])
            .fold(0.0, f64::max);
        sum += best;
    }
    sum / g as f64
}

/// Mann-Whitney AUC by counting every positive/negative pair.
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                twice += 2;
            } else if scores[i] == scores[j] {
                twice += 1;
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

pub fn naive_softmax_ce(logits: &[f64], label: usize) -> f64 {
    let z: f64 = logits.iter().map(|v| v.exp()).sum();
    -(logits[label].exp() / z).ln()
}

/// `-y ln s(z) - (1 - y) ln s(-z)` with `s(t) = 1 / (1 + e^-t)`, written out
/// directly; `1 - s(z)` is taken as `s(-z)` so it keeps relative precision.
pub fn naive_bce(z: f64, y: bool) -> f64 {
    let sigmoid = |t: f64| 1.0 / (1.0 + (-t).exp());
    if y {
        -sigmoid(z).ln()
    } else {
        -sigmoid(-z).ln()
    }
}

pub fn naive_log_loss(logits: &[f64], label: usize) -> f64 {
    logits
        .iter()
        .enumerate()
        .map(|(i, &z)| naive_bce(z, i == label))
        .sum::<f64>()
        / logits.len() as f64
}

/// Quadrilateral with each corner of the axis-aligned `size` square moved by
/// up to `jitter * size`; stays convex and well conditioned for jitter < 0.2.
pub fn jittered_square(size: f64, jitter: f64, offsets: &[f64; 8]) -> [Point2; 4] {
    let base = [(0.0, 0.0), (size, 0.0), (size, size), (0.0, size)];
    std::array::from_fn(|i| {
        Point2::new(
            base[i].0 + offsets[2 * i] * jitter * size,
            base[i].1 + offsets[2 * i + 1] * jitter * size,
        )
    })
}

/// Smooth test image in `[0, 1]`, slow enough for bilinear resampling.
pub fn smooth_image(w: usize, h: usize) -> keyforge::RasterImage {
    let data = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            (0.5 + 0.25 * (x as f64 / 23.0).sin() + 0.25 * (y as f64 / 31.0).cos()) as f32
        })
        .collect();
    keyforge::RasterImage::new(w, h, 1, data).unwrap()
}
