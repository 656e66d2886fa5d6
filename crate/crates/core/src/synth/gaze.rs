use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use super::{mix_seed, ImageLayout};
use crate::exec::Execution;
use crate::gaze::{
    DisplayIndex, DisplayRecord, Flip, GazePoint, GazeSequence, ImagePoint, ImageSize, Rotation, Viewport,
};
use crate::{Error, Result};

/// Shape parameter of the Gamma distribution fixation durations are drawn
/// from. The mean is [`ObserverModel::dwell_ms`].
pub const DWELL_SHAPE: f64 = 3.0;

/// Time between consecutive fixations during which no samples are emitted.
const SACCADE_MS: f64 = 40.0;

/// A synthetic reader. The defaults are made up; they were chosen so that
/// agreement across observers separates real objects from artifacts the way
/// a real reader panel would.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverModel {
    pub hit_rate: f64,
    /// Mean fixation duration.
    pub dwell_ms: f64,
    /// Standard deviation of gaze around the fixation target, image pixels,
    /// per axis.
    pub dispersion: f64,
    /// Poisson mean of fixations at uniform random positions, per image.
    pub false_fixations: f64,
    pub distractor_attraction: f64,
    pub sample_rate: f64,
    /// Probability a sample is unusable: half of these are flagged invalid
    /// with no position, the rest carry a confidence below 0.45.
    pub dropout: f64,
}

impl Default for ObserverModel {
    fn default() -> Self {
        ObserverModel {
            hit_rate: 0.9,
            dwell_ms: 333.0,
            dispersion: 25.0,
            false_fixations: 2.0,
            distractor_attraction: 0.25,
            sample_rate: 60.0,
            dropout: 0.05,
        }
    }
}

impl ObserverModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("hit_rate", self.hit_rate),
            ("distractor_attraction", self.distractor_attraction),
            ("dropout", self.dropout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        for (name, v) in [
            ("dwell_ms", self.dwell_ms),
            ("dispersion", self.dispersion),
            ("false_fixations", self.false_fixations),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// `n` identical default observers named `P01`, `P02`, ...
pub fn default_observers(n: usize) -> Vec<(String, ObserverModel)> {
    (1..=n)
        .map(|i| (format!("P{i:02}"), ObserverModel::default()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenSetup {
    pub width: f64,
    pub height: f64,
}

impl Default for ScreenSetup {
    fn default() -> Self {
        ScreenSetup {
            width: 1920.0,
            height: 1080.0,
        }
    }
}

/// One record per (participant, image) with a uniformly random rotation and
/// flip, scaled to fit the screen and centred on it.
pub fn random_display_records(
    images: &[(String, ImageSize)],
    participants: &[String],
    screen: ScreenSetup,
    seed: u64,
) -> Vec<DisplayRecord> {
    let mut out = Vec::with_capacity(images.len() * participants.len());
    for (pi, pid) in participants.iter().enumerate() {
        for (ii, (image_id, size)) in images.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, pi as u64, ii as u64 ^ (1 << 40)));
            let rotation = Rotation::ALL[rng.random_range(0..4)];
            let flip = Flip::ALL[rng.random_range(0..3)];
            let (dw, dh) = if rotation.swaps_axes() {
                (size.height as f64, size.width as f64)
            } else {
                (size.width as f64, size.height as f64)
            };
            let scale = (screen.width / dw).min(screen.height / dh);
            out.push(DisplayRecord {
                participant_id: Some(pid.clone()),
                image_id: image_id.clone(),
                rotation,
                flip,
                viewport: Viewport {
                    origin_x: (screen.width - scale * dw) / 2.0,
                    origin_y: (screen.height - scale * dh) / 2.0,
                    scale,
                },
                image_size: *size,
            });
        }
    }
    out
}

/// What an observer looks at on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeScene {
    pub image_id: String,
    pub size: ImageSize,
    pub ground_truth: Vec<ImagePoint>,
    pub distractors: Vec<ImagePoint>,
}

impl From<&ImageLayout> for GazeScene {
    fn from(l: &ImageLayout) -> Self {
        GazeScene {
            image_id: l.image_id.clone(),
            size: l.size,
            ground_truth: l.ground_truth(),
            distractors: l.distractor_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGaze {
    /// Ordered by (image_id, participant_id).
    pub sequences: Vec<GazeSequence>,
    pub displays: Vec<DisplayRecord>,
}

fn fixation_targets(rng: &mut ChaCha8Rng, model: &ObserverModel, scene: &GazeScene) -> Vec<ImagePoint> {
    let mut targets = Vec::new();
    for p in &scene.ground_truth {
        if rng.random_bool(model.hit_rate) {
            targets.push(*p);
        }
    }
    for p in &scene.distractors {
        if rng.random_bool(model.distractor_attraction) {
            targets.push(*p);
        }
    }
    let n_false = if model.false_fixations > 0.0 {
        Poisson::new(model.false_fixations)
            .map(|d| d.sample(rng) as usize)
            .unwrap_or(0)
    } else {
        0
    };
    let (w, h) = (scene.size.width as f64, scene.size.height as f64);
    for _ in 0..n_false {
        targets.push(ImagePoint::new(rng.random_range(0.0..w), rng.random_range(0.0..h)));
    }
    targets.shuffle(rng);
    targets
}

fn observe(
    model: &ObserverModel,
    scene: &GazeScene,
    display: &DisplayRecord,
    seed: u64,
) -> Vec<GazePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = fixation_targets(&mut rng, model, scene);
    let period = 1000.0 / model.sample_rate;
    let dwell = Gamma::new(DWELL_SHAPE, model.dwell_ms / DWELL_SHAPE).ok();
    let mut t = 0.0;
    let mut points = Vec::new();
    for target in targets {
        let ms = match &dwell {
            Some(g) if model.dwell_ms > 0.0 => g.sample(&mut rng),
            _ => model.dwell_ms,
        };
        let n = ((ms / period).round() as usize).max(1);
        for _ in 0..n {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let lost = rng.random_bool(model.dropout);
            let p = ImagePoint::new(
                target.x + model.dispersion * dx,
                target.y + model.dispersion * dy,
            );
            let (sx, sy) = display.image_to_screen(p);
            let sample = if !lost {
                GazePoint::new(t, sx, sy, rng.random_range(0.7..=1.0))
            } else if rng.random_bool(0.5) {
                GazePoint::invalid(t)
            } else {
                GazePoint::new(t, sx, sy, rng.random_range(0.0..0.45))
            };
            points.push(sample);
            t += period;
        }
        t += SACCADE_MS;
    }
    points
}

/// Simulate every participant looking at every scene.
///
/// The image-space samples depend only on `seed`, the participant's position
/// in `participants` and the scene's position in `scenes`, never on the
/// display record, so changing how an image was shown changes only the screen
/// coordinates.
pub fn gen_gaze(
    scenes: &[GazeScene],
    participants: &[(String, ObserverModel)],
    displays: &DisplayIndex,
    seed: u64,
    execution: Execution,
) -> Result<SyntheticGaze> {
    for (_, m) in participants {
        m.validate()?;
    }
    let mut jobs = Vec::with_capacity(scenes.len() * participants.len());
    for (si, scene) in scenes.iter().enumerate() {
        let mut order: Vec<usize> = (0..participants.len()).collect();
        order.sort_by(|&a, &b| participants[a].0.cmp(&participants[b].0));
        for pi in order {
            let pid = &participants[pi].0;
            let record = displays
                .get(pid, &scene.image_id)
                .ok_or_else(|| Error::MissingDisplayRecord {
                    participant_id: pid.clone(),
                    image_id: scene.image_id.clone(),
                })?;
            let mut record = record.clone();
            record.participant_id = Some(pid.clone());
            record.validate()?;
            jobs.push((si, pi, record));
        }
    }
    let sequences = execution.map(&jobs, |(si, pi, record)| {
        let (pid, model) = &participants[*pi];
        let scene = &scenes[*si];
        GazeSequence {
            participant_id: pid.clone(),
            image_id: scene.image_id.clone(),
            points: observe(model, scene, record, mix_seed(seed, *pi as u64, *si as u64)),
            display: record.clone(),
        }
    });
    let mut sequences = sequences;
    sequences.sort_by(|a, b| {
        (a.image_id.as_str(), a.participant_id.as_str())
            .cmp(&(b.image_id.as_str(), b.participant_id.as_str()))
    });
    let displays = sequences.iter().map(|s| s.display.clone()).collect();
    Ok(SyntheticGaze {
        sequences,
        displays,
    })
}
