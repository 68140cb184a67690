//! Longitudinal-error-tolerant (LET) matching and LET-mAP / mAPH / mAPL over
//! the edited instances of each clip, plus fixed-size crop export for
//! external appearance metrics.
//!
//! Matching: a detection is translated along the camera line of sight onto
//! its ground truth's range before the IoU test, and the pair is admissible
//! only while the longitudinal error stays within `lon_tolerance_frac · range`.
//!
//! Credit per true positive:
//!
//! | metric | weight                          |
//! |--------|---------------------------------|
//! | mAP    | 1                               |
//! | mAPH   | `h = 1 − Δθ/π`                  |
//! | mAPL   | `h · a`, `a = 1 − min(|e|, tol)/tol` |
//!
//! The longitudinal weight is applied on top of the heading weight so that
//! `mAPL ≤ mAPH ≤ mAP` holds for every input.

mod iou;

pub use iou::{bev_intersection, iou3d};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataprep::{crop, square_around};
use crate::geometry::{wrap_angle, CameraFrame, Vec3};
use crate::layout::{projected_aabb, Box3D, ObjectClass};

pub const EVAL_CROP_SIZE: u32 = 512;
/// Ground truths closer than this to the camera have no usable line of sight.
pub const MIN_RANGE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("ground truth is only {range} m from the camera")]
    DegenerateRange { range: f64 },
    #[error("no ground truth across all clips")]
    NoGroundTruth,
    #[error("box is not visible in this camera")]
    NotVisible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
    pub class: ObjectClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub object_id: String,
    pub bbox: Box3D,
    pub class: ObjectClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub lon_tolerance_frac: f64,
    pub iou_threshold: f64,
    pub restrict_to_edited: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lon_tolerance_frac: 0.05,
            iou_threshold: 0.5,
            restrict_to_edited: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetAlignment {
    pub aligned: Box3D,
    pub lon_error: f64,
    pub range: f64,
}

/// Splits the detection's center error into its component along the line
/// of sight to the ground truth and removes it.
pub fn let_align(det: &Box3D, gt: &Box3D, cam_center: &Vec3) -> Result<LetAlignment, EvalError> {
    let los = gt.center - cam_center;
    let range = los.norm();
    if !(range >= MIN_RANGE) {
        return Err(EvalError::DegenerateRange { range });
    }
    let u = los / range;
    let lon_error = (det.center - gt.center).dot(&u);
    let aligned = Box3D {
        center: det.center - u * lon_error,
        ..*det
    };
    Ok(LetAlignment {
        aligned,
        lon_error,
        range,
    })
}

/// Absolute heading difference wrapped into [0, π].
pub fn heading_error(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub object_id: String,
    pub class: ObjectClass,
    pub score: f64,
    pub lon_error: f64,
    pub range: f64,
    pub heading_error: f64,
    pub iou: f64,
    /// Absolute longitudinal tolerance used for this pair, in meters.
    pub tolerance: f64,
}

impl Match {
    pub fn heading_weight(&self) -> f64 {
        1.0 - self.heading_error / std::f64::consts::PI
    }

    pub fn longitudinal_affinity(&self) -> f64 {
        if self.tolerance <= 0.0 {
            return 0.0;
        }
        1.0 - self.lon_error.abs().min(self.tolerance) / self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub false_positives: Vec<(ObjectClass, f64)>,
    pub missed: Vec<GroundTruth>,
}

impl MatchResult {
    pub fn extend(&mut self, other: MatchResult) {
        self.matches.extend(other.matches);
        self.false_positives.extend(other.false_positives);
        self.missed.extend(other.missed);
    }

    pub fn num_ground_truth(&self) -> usize {
        self.matches.len() + self.missed.len()
    }
}

fn det_order(a: &Detection, b: &Detection) -> Ordering {
    let key = |d: &Detection| {
        [
            d.bbox.center.x,
            d.bbox.center.y,
            d.bbox.center.z,
            d.bbox.dims.x,
            d.bbox.dims.y,
            d.bbox.dims.z,
            d.bbox.yaw,
        ]
    };
    b.score
        .total_cmp(&a.score)
        .then_with(|| {
            key(a)
                .iter()
                .zip(key(b))
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then(a.class.cmp(&b.class))
}

/// Greedy LET matching within one frame. Detections are visited by
/// descending score (ties broken by box geometry, so input order never
/// matters); each picks the admissible, still unmatched ground truth of the
/// same class with the highest IoU.
pub fn let_match(
    dets: &[Detection],
    gts: &[GroundTruth],
    cfg: &EvalConfig,
    cam_center: &Vec3,
) -> Result<MatchResult, EvalError> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| det_order(a, b));
    let mut taken = vec![false; gts.len()];
    let mut result = MatchResult::default();
    for det in order {
        let mut best: Option<(usize, f64, LetAlignment)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] || gt.class != det.class {
                continue;
            }
            let al = let_align(&det.bbox, &gt.bbox, cam_center)?;
            if al.lon_error.abs() > cfg.lon_tolerance_frac * al.range {
                continue;
            }
            let iou = iou3d(&al.aligned, &gt.bbox);
            if iou < cfg.iou_threshold {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b, _)| iou > *b) {
                best = Some((gi, iou, al));
            }
        }
        match best {
            Some((gi, iou, al)) => {
                taken[gi] = true;
                let gt = &gts[gi];
                result.matches.push(Match {
                    object_id: gt.object_id.clone(),
                    class: gt.class,
                    score: det.score,
                    lon_error: al.lon_error,
                    range: al.range,
                    heading_error: heading_error(det.bbox.yaw, gt.bbox.yaw),
                    iou,
                    tolerance: cfg.lon_tolerance_frac * al.range,
                });
            }
            None => result.false_positives.push((det.class, det.score)),
        }
    }
    result.missed = gts
        .iter()
        .zip(&taken)
        .filter(|(_, t)| !**t)
        .map(|(g, _)| g.clone())
        .collect();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApTriple {
    pub let_map: f64,
    pub let_maph: f64,
    pub let_mapl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub clip: String,
    /// `None` when the clip has no ground truth.
    pub metrics: Option<ApTriple>,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub let_map: f64,
    pub let_maph: f64,
    pub let_mapl: f64,
    pub per_class: BTreeMap<ObjectClass, ApTriple>,
    pub per_clip: Vec<ClipMetrics>,
    pub counts: Counts,
}

/// Area under the precision/recall curve. Operating points are the distinct
/// scores; `weighted` pairs each detection's score with its TP credit (0 for
/// false positives). Credit enters both the precision and the recall
/// numerators, the curve starts at recall 0 with the first point's precision,
/// and the area is integrated with the trapezoid rule.
pub fn average_precision(weighted: &[(f64, f64)], num_gt: usize) -> f64 {
    if num_gt == 0 || weighted.is_empty() {
        return 0.0;
    }
    let mut sorted = weighted.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let g = num_gt as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut credit, mut count) = (0.0, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            credit += sorted[i].1;
            count += 1;
            i += 1;
        }
        points.push((credit / g, credit / count as f64));
    }
    let mut ap = 0.0;
    let (mut r_prev, mut p_prev) = (0.0, points[0].1);
    for (r, p) in points {
        ap += (r - r_prev) * 0.5 * (p + p_prev);
        r_prev = r;
        p_prev = p;
    }
    ap.clamp(0.0, 1.0)
}

fn ap_triple(results: &[&MatchResult], class: Option<ObjectClass>) -> Option<ApTriple> {
    let keep = |c: ObjectClass| class.is_none_or(|k| k == c);
    let num_gt = results
        .iter()
        .map(|r| {
            r.matches.iter().filter(|m| keep(m.class)).count()
                + r.missed.iter().filter(|g| keep(g.class)).count()
        })
        .sum::<usize>();
    if num_gt == 0 {
        return None;
    }
    let mut plain = Vec::new();
    let mut heading = Vec::new();
    let mut lon = Vec::new();
    for r in results {
        for m in r.matches.iter().filter(|m| keep(m.class)) {
            let h = m.heading_weight();
            plain.push((m.score, 1.0));
            heading.push((m.score, h));
            lon.push((m.score, h * m.longitudinal_affinity()));
        }
        for &(_, s) in r.false_positives.iter().filter(|(c, _)| keep(*c)) {
            plain.push((s, 0.0));
            heading.push((s, 0.0));
            lon.push((s, 0.0));
        }
    }
    Some(ApTriple {
        let_map: average_precision(&plain, num_gt),
        let_maph: average_precision(&heading, num_gt),
        let_mapl: average_precision(&lon, num_gt),
    })
}

fn mean_over_classes(results: &[&MatchResult]) -> (Option<ApTriple>, BTreeMap<ObjectClass, ApTriple>) {
    let mut classes: Vec<ObjectClass> = results
        .iter()
        .flat_map(|r| r.matches.iter().map(|m| m.class).chain(r.missed.iter().map(|g| g.class)))
        .collect();
    classes.sort();
    classes.dedup();
    let per_class: BTreeMap<_, _> = classes
        .iter()
        .filter_map(|&c| ap_triple(results, Some(c)).map(|t| (c, t)))
        .collect();
    if per_class.is_empty() {
        return (None, per_class);
    }
    let n = per_class.len() as f64;
    let mean = ApTriple {
        let_map: per_class.values().map(|t| t.let_map).sum::<f64>() / n,
        let_maph: per_class.values().map(|t| t.let_maph).sum::<f64>() / n,
        let_mapl: per_class.values().map(|t| t.let_mapl).sum::<f64>() / n,
    };
    (Some(mean), per_class)
}

fn counts(results: &[&MatchResult]) -> Counts {
    Counts {
        tp: results.iter().map(|r| r.matches.len()).sum(),
        fp: results.iter().map(|r| r.false_positives.len()).sum(),
        fn_: results.iter().map(|r| r.missed.len()).sum(),
    }
}

/// Reduces per-clip match lists into class-averaged LET metrics.
pub fn compute_metrics(clips: &[(String, MatchResult)]) -> Result<MetricsReport, EvalError> {
    let all: Vec<&MatchResult> = clips.iter().map(|(_, r)| r).collect();
    let (mean, per_class) = mean_over_classes(&all);
    let mean = mean.ok_or(EvalError::NoGroundTruth)?;
    let per_clip = clips
        .iter()
        .map(|(name, r)| ClipMetrics {
            clip: name.clone(),
            metrics: mean_over_classes(&[r]).0,
            counts: counts(&[r]),
        })
        .collect();
    Ok(MetricsReport {
        let_map: mean.let_map,
        let_maph: mean.let_maph,
        let_mapl: mean.let_mapl,
        per_class,
        per_clip,
        counts: counts(&all),
    })
}

/// Square crop around a (possibly partially) visible box, resized to
/// 512×512.
pub fn crop_eval_region(frame: &RgbImage, b: &Box3D, cam: &CameraFrame) -> Result<RgbImage, EvalError> {
    let (w, h) = frame.dimensions();
    let aabb = projected_aabb(b, cam)
        .and_then(|r| r.clip(w, h))
        .ok_or(EvalError::NotVisible)?;
    let region = match square_around(&aabb, w, h) {
        Ok(r) => r,
        Err(_) => {
            // Larger than the image: shrink to the largest square that fits.
            let side = w.min(h) as f64;
            let (cx, cy) = aabb.center();
            let r = crate::raster::Rect {
                x0: cx - side / 2.0,
                y0: cy - side / 2.0,
                x1: cx + side / 2.0,
                y1: cy + side / 2.0,
            };
            square_around(&r, w, h).map_err(|_| EvalError::NotVisible)?
        }
    };
    Ok(resize_bilinear(&crop(frame, &region), EVAL_CROP_SIZE, EVAL_CROP_SIZE))
}

/// Bilinear resampling with corner-anchored sample positions: output pixel
/// `i` reads input coordinate `i · (n_in − 1) / (n_out − 1)`.
pub fn resize_bilinear(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (sw, sh) = src.dimensions();
    let scale = |n_in: u32, n_out: u32| {
        if n_out > 1 {
            (n_in.saturating_sub(1)) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sx, sy) = (scale(sw, width), scale(sh, height));
    RgbImage::from_fn(width, height, |x, y| {
        let fx = x as f64 * sx;
        let fy = y as f64 * sy;
        let (x0, y0) = (fx.floor() as u32, fy.floor() as u32);
        let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let px = |xx, yy| src.get_pixel(xx, yy).0;
        let (a, b, c, d) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - tx) + b[k] as f64 * tx;
            let bottom = c[k] as f64 * (1.0 - tx) + d[k] as f64 * tx;
            let v = top * (1.0 - ty) + bottom * ty;
            out[k] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}
