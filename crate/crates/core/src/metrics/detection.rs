use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Axis-aligned box `[x0, y0, x1, y1]` in pixels (corner coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoxF {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoxF {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl From<[f64; 4]> for BoxF {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

impl From<BoxF> for [f64; 4] {
    fn from(b: BoxF) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

pub fn box_iou(a: &BoxF, b: &BoxF) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: BoxF,
    pub score: f64,
}

/// Precision-recall points in rank order, and the all-point AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve {
    /// `(recall, precision)` after each ranked detection.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// Average precision with greedy matching.
///
/// Detections are ranked by descending score (stable, so ties keep input
/// order). Each one takes the unmatched ground-truth box of its image with
/// the highest IoU, if that IoU reaches `iou_thr`; otherwise it is a false
/// positive. AP is the area under the precision envelope.
pub fn average_precision(
    dets: &[Detection],
    gts: &BTreeMap<String, Vec<BoxF>>,
    iou_thr: f64,
) -> Result<PRCurve, MetricsError> {
    if !(iou_thr > 0.0 && iou_thr < 1.0) {
        return Err(MetricsError::InvalidArgument(format!(
            "iou_thr = {iou_thr}"
        )));
    }
    let total: usize = gts.values().map(Vec::len).sum();
    if total == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));

    let mut used: BTreeMap<&str, Vec<bool>> = gts
        .iter()
        .map(|(k, v)| (k.as_str(), vec![false; v.len()]))
        .collect();
    let mut hits = Vec::with_capacity(dets.len());
    for &i in &order {
        let d = &dets[i];
        let mut hit = false;
        if let (Some(boxes), Some(taken)) =
            (gts.get(&d.image_id), used.get_mut(d.image_id.as_str()))
        {
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in boxes.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let iou = box_iou(&d.bbox, g);
                if iou >= iou_thr && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((j, iou));
                }
            }
            if let Some((j, _)) = best {
                taken[j] = true;
                hit = true;
            }
        }
        hits.push(hit);
    }

    let mut tp = 0usize;
    let mut points = Vec::with_capacity(hits.len());
    for (k, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        points.push((tp as f64 / total as f64, tp as f64 / (k + 1) as f64));
    }
    // Envelope: best precision at this rank or any later one.
    let mut envelope = vec![0.0f64; points.len()];
    let mut run = 0.0f64;
    for k in (0..points.len()).rev() {
        run = run.max(points[k].1);
        envelope[k] = run;
    }
    let mut area = 0.0;
    for (k, &hit) in hits.iter().enumerate() {
        if hit {
            area += envelope[k];
        }
    }
    Ok(PRCurve {
        points,
        ap: area / total as f64,
    })
}
