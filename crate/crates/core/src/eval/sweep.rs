use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{pooled_prf, MetricsReport, PointsByImage};
use crate::consensus::{distill_points, sample_groups, DistillParams};
use crate::exec::Execution;
use crate::gaze::{GazeSequence, ImagePoint, ImageSize, DEFAULT_CONFIDENCE_MIN};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub n_runs: usize,
    pub params: DistillParams,
    pub confidence_min: f64,
    pub radius: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_values: (3..=14).collect(),
            n_runs: 20,
            params: DistillParams::default(),
            confidence_min: DEFAULT_CONFIDENCE_MIN,
            radius: super::DEFAULT_MATCH_RADIUS,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub run: usize,
    pub participants: Vec<String>,
    /// The failure message if distillation failed for this run.
    pub outcome: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics; `std` uses the `n - 1` denominator.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (q1, median, q3) = quartiles(&sorted);
        Some(Stats {
            mean,
            std: var.sqrt(),
            min: sorted[0],
            q1,
            median,
            q3,
            max: sorted[sorted.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quartiles of sorted data by linear interpolation between order
/// statistics (position `p * (n - 1)`).
pub fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    (q(0.25), q(0.5), q(0.75))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub k: usize,
    pub runs_ok: usize,
    pub precision: Option<Stats>,
    pub recall: Option<Stats>,
    pub f1: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub radius: f64,
    pub seed: u64,
}

impl SweepTable {
    pub fn summary(&self) -> Vec<SweepSummary> {
        let ks: BTreeSet<usize> = self.rows.iter().map(|r| r.k).collect();
        ks.into_iter()
            .map(|k| {
                let ok: Vec<&MetricsReport> = self
                    .rows
                    .iter()
                    .filter(|r| r.k == k)
                    .filter_map(|r| r.outcome.as_ref().ok())
                    .collect();
                let col = |f: fn(&MetricsReport) -> f64| {
                    Stats::from_values(&ok.iter().map(|m| f(m)).collect::<Vec<_>>())
                };
                SweepSummary {
                    k,
                    runs_ok: ok.len(),
                    precision: col(|m| m.precision),
                    recall: col(|m| m.recall),
                    f1: col(|m| m.f1),
                }
            })
            .collect()
    }

    pub fn summary_for(&self, k: usize) -> Option<SweepSummary> {
        self.summary().into_iter().find(|s| s.k == k)
    }
}

/// Derive a per-k seed so adding a k value does not change the others.
fn seed_for_k(seed: u64, k: usize) -> u64 {
    let mut z = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ProjectedImage {
    size: ImageSize,
    /// Projected points per participant, participants in sorted order.
    by_participant: BTreeMap<String, Vec<ImagePoint>>,
}

/// For every k, draw `n_runs` random observer groups, distill labels for
/// every image with each group, and score the pooled labels against `gt`.
/// A failing run is recorded in its row; the sweep continues.
pub fn group_size_sweep(
    sequences_by_image: &BTreeMap<String, Vec<GazeSequence>>,
    gt: &PointsByImage,
    config: &SweepConfig,
) -> Result<SweepTable> {
    config.params.validate()?;
    if config.n_runs == 0 {
        return Err(Error::invalid("number of runs must be at least 1"));
    }
    let participants: Vec<String> = sequences_by_image
        .values()
        .flatten()
        .map(|s| s.participant_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for &k in &config.k_values {
        if k == 0 || k > participants.len() {
            return Err(Error::GroupTooLarge {
                k,
                available: participants.len(),
            });
        }
    }

    // Projection does not depend on the group, so do it once.
    let images: Vec<(&String, &Vec<GazeSequence>)> = sequences_by_image.iter().collect();
    let projected: Vec<(String, ProjectedImage)> = config.execution.map(&images, |(id, seqs)| {
        let size = seqs
            .first()
            .map(|s| s.display.image_size)
            .unwrap_or(ImageSize::square(1));
        let mut by_participant: BTreeMap<String, Vec<ImagePoint>> = BTreeMap::new();
        for s in seqs.iter() {
            by_participant
                .entry(s.participant_id.clone())
                .or_default()
                .extend(s.project(config.confidence_min));
        }
        (
            (*id).clone(),
            ProjectedImage {
                size,
                by_participant,
            },
        )
    });

    let mut tasks = Vec::new();
    for &k in &config.k_values {
        let groups = sample_groups(&participants, k, config.n_runs, seed_for_k(config.seed, k))?;
        for (run, group) in groups.into_iter().enumerate() {
            tasks.push((k, run, group));
        }
    }

    let rows = config.execution.map(&tasks, |(k, run, group)| {
        let outcome = run_group(&projected, group, config).map(|pred| pooled_prf(&pred, gt, config.radius));
        SweepRow {
            k: *k,
            run: *run,
            participants: group.clone(),
            outcome: outcome.map_err(|e| e.to_string()),
        }
    });
    Ok(SweepTable {
        rows,
        radius: config.radius,
        seed: config.seed,
    })
}

fn run_group(
    projected: &[(String, ProjectedImage)],
    group: &[String],
    config: &SweepConfig,
) -> Result<PointsByImage> {
    let mut chosen: Vec<&String> = group.iter().collect();
    chosen.sort();
    let mut out = PointsByImage::new();
    let mut points = Vec::new();
    for (id, img) in projected {
        points.clear();
        for p in &chosen {
            if let Some(pts) = img.by_participant.get(*p) {
                points.extend_from_slice(pts);
            }
        }
        let labels = distill_points(&points, img.size, group.len(), &config.params, id)?;
        out.insert(id.clone(), labels.iter().map(|l| l.point()).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let (q1, m, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((q1, m, q3), (2.0, 3.0, 4.0));
        let (q1, m, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((q1, m, q3), (1.75, 2.5, 3.25));
        assert_eq!(quartiles(&[7.0]), (7.0, 7.0, 7.0));
    }

    #[test]
    fn stats_of_constant_values() {
        let s = Stats::from_values(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((s.mean, s.std, s.iqr()), (0.5, 0.0, 0.0));
        assert!(Stats::from_values(&[]).is_none());
    }

    #[test]
    fn per_k_seeds_differ() {
        assert_ne!(seed_for_k(1, 3), seed_for_k(1, 4));
        assert_eq!(seed_for_k(1, 3), seed_for_k(1, 3));
    }
}
