use std::collections::BTreeMap;

use image::RgbImage;

use super::{
    default_observers, gen_gaze, layouts, random_display_records, render, GazeScene, ImageLayout,
    ObserverModel, ScreenSetup, SlideSpec, SyntheticGaze,
};
use crate::eval::PointsByImage;
use crate::exec::Execution;
use crate::gaze::{DisplayIndex, GazeSequence};
use crate::Result;

/// A slide set plus a reader panel that looked at it.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub slide: SlideSpec,
    pub n_observers: usize,
    pub observer: ObserverModel,
    pub screen: ScreenSetup,
    /// Seed for display transforms and gaze; the slide has its own.
    pub gaze_seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            slide: SlideSpec {
                seed: 20_250_101,
                ..SlideSpec::default()
            },
            n_observers: 14,
            observer: ObserverModel::default(),
            screen: ScreenSetup::default(),
            gaze_seed: 7,
        }
    }
}

/// Layouts and gaze are kept; pixels are rendered on demand since a full
/// slide set does not comfortably fit in memory.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub layouts: Vec<ImageLayout>,
    pub participants: Vec<(String, ObserverModel)>,
    pub gaze: SyntheticGaze,
}

impl Benchmark {
    pub fn generate(spec: &BenchmarkSpec, execution: Execution) -> Result<Benchmark> {
        let layouts = layouts(&spec.slide)?;
        let participants: Vec<(String, ObserverModel)> = default_observers(spec.n_observers)
            .into_iter()
            .map(|(id, _)| (id, spec.observer))
            .collect();
        let ids: Vec<String> = participants.iter().map(|p| p.0.clone()).collect();
        let images: Vec<_> = layouts.iter().map(|l| (l.image_id.clone(), l.size)).collect();
        let displays = DisplayIndex::from_records(random_display_records(
            &images,
            &ids,
            spec.screen,
            spec.gaze_seed,
        ))?;
        let scenes: Vec<GazeScene> = layouts.iter().map(GazeScene::from).collect();
        let gaze = gen_gaze(&scenes, &participants, &displays, spec.gaze_seed, execution)?;
        Ok(Benchmark {
            spec: spec.clone(),
            layouts,
            participants,
            gaze,
        })
    }

    pub fn render(&self, index: usize) -> RgbImage {
        render(&self.layouts[index])
    }

    /// Ground truth for every image, including the empty ones.
    pub fn ground_truth(&self) -> PointsByImage {
        self.layouts
            .iter()
            .map(|l| (l.image_id.clone(), l.ground_truth()))
            .collect()
    }

    pub fn sequences_by_image(&self) -> BTreeMap<String, Vec<GazeSequence>> {
        let mut out: BTreeMap<String, Vec<GazeSequence>> = BTreeMap::new();
        for s in &self.gaze.sequences {
            out.entry(s.image_id.clone()).or_default().push(s.clone());
        }
        out
    }
}
