//! Point matching, precision/recall/F1, PR curves and group-size sweeps.

mod matching;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::detect::Detection;
use crate::gaze::ImagePoint;

pub use matching::{match_points, MatchResult};
pub use sweep::{group_size_sweep, quartiles, Stats, SweepConfig, SweepRow, SweepSummary, SweepTable};

/// Default matching radius in pixels.
pub const DEFAULT_MATCH_RADIUS: f64 = 30.0;

/// Points grouped by image id.
pub type PointsByImage = BTreeMap<String, Vec<ImagePoint>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MetricsReport {
    /// Precision is 1 when there are no predictions, recall is 1 when there
    /// is no ground truth, and F1 is 0 when both rates are 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricsReport {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    pub fn from_match(m: &MatchResult) -> Self {
        Self::from_counts(m.tp(), m.false_positives.len(), m.false_negatives.len())
    }
}

pub fn prf(pred: &[ImagePoint], gt: &[ImagePoint], radius: f64) -> MetricsReport {
    MetricsReport::from_match(&match_points(pred, gt, radius))
}

/// Micro-averaged metrics: match image by image, then pool the counts.
/// Images present on only one side count entirely as false positives or
/// false negatives.
pub fn pooled_prf(pred: &PointsByImage, gt: &PointsByImage, radius: f64) -> MetricsReport {
    let ids: BTreeSet<&String> = pred.keys().chain(gt.keys()).collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for id in ids {
        let p = pred.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let g = gt.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let m = match_points(p, g, radius);
        tp += m.tp();
        fp += m.false_positives.len();
        fn_ += m.false_negatives.len();
    }
    MetricsReport::from_counts(tp, fp, fn_)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Pooled precision and recall of the detections with probability at or
/// above each threshold.
pub fn pr_curve(
    detections: &[Detection],
    gt: &PointsByImage,
    radius: f64,
    thresholds: &[f64],
) -> Vec<PrPoint> {
    debug_assert!(thresholds.windows(2).all(|w| w[0] <= w[1]));
    thresholds
        .iter()
        .map(|&t| {
            let kept = detections_by_image(detections.iter().filter(|d| d.probability >= t));
            let m = pooled_prf(&kept, gt, radius);
            PrPoint {
                threshold: t,
                precision: m.precision,
                recall: m.recall,
            }
        })
        .collect()
}

pub fn detections_by_image<'a>(detections: impl IntoIterator<Item = &'a Detection>) -> PointsByImage {
    let mut out = PointsByImage::new();
    for d in detections {
        out.entry(d.image_id.clone()).or_default().push(d.point());
    }
    out
}

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn uniform_thresholds(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
