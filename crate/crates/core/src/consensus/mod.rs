//! Consensus labels from pooled observer gaze.
//!
//! For one image and a group of `k` observers: project and filter their
//! samples, accumulate a Gaussian density map, zero everything below
//! `threshold_coef * k`, drop hotspots smaller than `min_area` pixels, and
//! emit the density-weighted centroid of each surviving hotspot.

mod heatmap;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::components::{blob, Mask};
use crate::gaze::{GazeSequence, ImagePoint, ImageSize};
use crate::{Error, Result};

pub use heatmap::{accumulate_heatmap, GazeHeatmap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillParams {
    /// Kernel standard deviation in pixels.
    pub sigma: f64,
    /// Kernel support radius in pixels.
    pub truncation_radius: f64,
    /// Per-observer density threshold; the cutoff is `threshold_coef * k`.
    pub threshold_coef: f64,
    /// Smallest hotspot kept, in pixels.
    pub min_area: usize,
}

impl Default for DistillParams {
    fn default() -> Self {
        DistillParams {
            sigma: 10.0,
            truncation_radius: 30.0,
            threshold_coef: 0.0018,
            min_area: 400,
        }
    }
}

impl DistillParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.truncation_radius >= self.sigma && self.truncation_radius.is_finite()) {
            return Err(Error::invalid(format!(
                "truncation radius {} must be at least sigma {}",
                self.truncation_radius, self.sigma
            )));
        }
        if !(self.threshold_coef >= 0.0 && self.threshold_coef.is_finite()) {
            return Err(Error::invalid(format!(
                "threshold coefficient must be non-negative, got {}",
                self.threshold_coef
            )));
        }
        Ok(())
    }

    pub fn cutoff(&self, k: usize) -> f64 {
        self.threshold_coef * k as f64
    }
}

/// A point label: the centroid of one hotspot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusLabel {
    pub image_id: String,
    pub x: f64,
    pub y: f64,
    /// Hotspot size in pixels.
    pub area: usize,
    /// Largest density inside the hotspot.
    pub peak: f64,
}

impl ConsensusLabel {
    pub fn point(&self) -> ImagePoint {
        ImagePoint::new(self.x, self.y)
    }
}

/// Cells at or above `threshold_coef * k` (and non-zero), with 8-connected
/// components smaller than `min_area` removed.
pub fn threshold_and_clean(heatmap: &GazeHeatmap, params: &DistillParams) -> Mask {
    let cutoff = params.cutoff(heatmap.k());
    let mask = Mask::from_indices(heatmap.size(), heatmap.indices_at_least(cutoff));
    mask.remove_small(params.min_area)
}

/// One label per connected component of `mask`, at its density-weighted
/// centroid.
pub fn extract_centroids(mask: &Mask, heatmap: &GazeHeatmap, image_id: &str) -> Vec<ConsensusLabel> {
    assert_eq!(mask.size(), heatmap.size(), "mask and heatmap sizes differ");
    let weight = |i: u32| heatmap.at_index(i);
    mask.components()
        .iter()
        .map(|comp| {
            let b = blob(mask.size(), comp, Some(&weight));
            ConsensusLabel {
                image_id: image_id.to_string(),
                x: b.centroid.x,
                y: b.centroid.y,
                area: b.area,
                peak: b.peak,
            }
        })
        .collect()
}

/// Heatmap, threshold and centroids for already-projected points.
pub fn distill_points(
    points: &[ImagePoint],
    size: ImageSize,
    k: usize,
    params: &DistillParams,
    image_id: &str,
) -> Result<Vec<ConsensusLabel>> {
    let heatmap = accumulate_heatmap(points, size, params, k)?;
    let mask = threshold_and_clean(&heatmap, params);
    Ok(extract_centroids(&mask, &heatmap, image_id))
}

/// Consensus labels for one image from the sequences of the chosen
/// participants. `k` is the number of chosen participants, whether or not
/// each of them has usable samples.
pub fn distill_labels(
    sequences: &[GazeSequence],
    chosen: &BTreeSet<String>,
    params: &DistillParams,
    confidence_min: f64,
) -> Result<Vec<ConsensusLabel>> {
    params.validate()?;
    let k = chosen.len();
    if k == 0 {
        return Err(Error::invalid("group size k must be at least 1"));
    }
    let Some(first) = sequences.first() else {
        return Ok(Vec::new());
    };
    let image_id = first.image_id.as_str();
    let size = first.display.image_size;
    if let Some(other) = sequences.iter().find(|s| s.image_id != image_id) {
        return Err(Error::invalid(format!(
            "sequences mix images {image_id:?} and {:?}",
            other.image_id
        )));
    }
    let mut selected: Vec<&GazeSequence> = sequences
        .iter()
        .filter(|s| chosen.contains(&s.participant_id))
        .collect();
    // Deposit order fixes floating-point summation order.
    selected.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    let points: Vec<ImagePoint> = selected
        .iter()
        .flat_map(|s| s.project(confidence_min))
        .collect();
    distill_points(&points, size, k, params, image_id)
}

/// `n_runs` random groups of `k` distinct participants, each listed in the
/// input order. Deterministic for a given seed.
pub fn sample_groups(
    participants: &[String],
    k: usize,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    if k == 0 {
        return Err(Error::invalid("group size k must be at least 1"));
    }
    if k > participants.len() {
        return Err(Error::GroupTooLarge {
            k,
            available: participants.len(),
        });
    }
    if n_runs == 0 {
        return Err(Error::invalid("number of runs must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_runs)
        .map(|_| {
            let mut idx = rand::seq::index::sample(&mut rng, participants.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| participants[i].clone()).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{DisplayRecord, GazePoint};

    fn noiseless_sequence(pid: &str, target: (f64, f64), n: usize) -> GazeSequence {
        GazeSequence {
            participant_id: pid.into(),
            image_id: "img".into(),
            points: (0..n)
                .map(|i| GazePoint::new(i as f64 * 16.7, target.0, target.1, 1.0))
                .collect(),
            display: DisplayRecord::identity("img", ImageSize::square(400)),
        }
    }

    fn chosen(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cutoff_scales_with_group_size() {
        let p = DistillParams::default();
        assert!((p.cutoff(14) - 0.0252).abs() < 1e-15);
    }

    #[test]
    fn zero_heatmap_gives_empty_mask() {
        let map = accumulate_heatmap(&[], ImageSize::square(50), &DistillParams::default(), 3)
            .unwrap();
        let params = DistillParams {
            threshold_coef: 0.0,
            ..DistillParams::default()
        };
        assert!(threshold_and_clean(&map, &params).is_empty());
        assert!(extract_centroids(&threshold_and_clean(&map, &params), &map, "x").is_empty());
    }

    #[test]
    fn single_observer_fixation_becomes_one_label() {
        let seq = noiseless_sequence("P1", (200.0, 150.0), 30);
        let labels =
            distill_labels(&[seq], &chosen(&["P1"]), &DistillParams::default(), 0.5).unwrap();
        assert_eq!(labels.len(), 1);
        assert!((labels[0].x - 200.0).abs() < 0.5 && (labels[0].y - 150.0).abs() < 0.5);
        assert!(labels[0].area >= 400);
    }

    #[test]
    fn disjoint_fixations_have_no_consensus() {
        // Each observer alone: 30 coincident samples. Peak ~ 30/(2*pi*100)
        // = 0.048; the k=2 cutoff at coefficient 0.03 is 0.06. Together the
        // hotspot is only ~300 px, so the area filter is relaxed here.
        let seqs = [
            noiseless_sequence("P1", (100.0, 100.0), 30),
            noiseless_sequence("P2", (300.0, 300.0), 30),
        ];
        let params = DistillParams {
            threshold_coef: 0.03,
            min_area: 100,
            ..DistillParams::default()
        };
        let labels = distill_labels(&seqs, &chosen(&["P1", "P2"]), &params, 0.5).unwrap();
        assert!(labels.is_empty());
        // The same two observers agreeing on one spot clear the cutoff.
        let seqs = [
            noiseless_sequence("P1", (100.0, 100.0), 30),
            noiseless_sequence("P2", (100.0, 100.0), 30),
        ];
        let labels = distill_labels(&seqs, &chosen(&["P1", "P2"]), &params, 0.5).unwrap();
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn two_hotspots_two_labels() {
        let seqs = [
            noiseless_sequence("P1", (100.0, 100.0), 30),
            noiseless_sequence("P1", (300.0, 250.0), 30),
        ];
        let labels = distill_labels(&seqs, &chosen(&["P1"]), &DistillParams::default(), 0.5)
            .unwrap();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn empty_group_is_an_error_and_no_points_is_not() {
        let seq = noiseless_sequence("P1", (100.0, 100.0), 3);
        assert!(distill_labels(std::slice::from_ref(&seq), &chosen(&[]), &DistillParams::default(), 0.5).is_err());
        let labels =
            distill_labels(&[seq], &chosen(&["P9"]), &DistillParams::default(), 0.5).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn sample_groups_contract() {
        let ps: Vec<String> = (1..=14).map(|i| format!("P{i:02}")).collect();
        let full = sample_groups(&ps, 14, 3, 1).unwrap();
        assert!(full.iter().all(|g| g == &ps));

        let a = sample_groups(&ps, 3, 20, 7).unwrap();
        let b = sample_groups(&ps, 3, 20, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for g in &a {
            let set: BTreeSet<_> = g.iter().collect();
            assert_eq!(set.len(), 3);
        }
        assert_ne!(a, sample_groups(&ps, 3, 20, 8).unwrap());
        assert!(matches!(
            sample_groups(&ps, 15, 1, 0),
            Err(Error::GroupTooLarge { k: 15, available: 14 })
        ));
    }
}
