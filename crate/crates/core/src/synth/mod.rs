//! Deterministic synthetic slides and observers.
//!
//! Images are crude stand-ins for stained fields: a pale background with
//! bluish nuclei, dark-brown elliptical "mitoses" at the ground-truth points
//! and lighter-brown irregular artifacts at the distractor points. Both kinds
//! of brown object fall inside the default heuristic color window, so the
//! color baseline cannot tell them apart, while observers mostly fixate the
//! real objects.
//!
//! Every image and every (observer, image) pair draws from its own seeded
//! stream, so results do not depend on generation order or thread count.

mod gaze;
mod render;
mod scenario;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::exec::Execution;
use crate::gaze::{ImagePoint, ImageSize};
use crate::{Error, Result};

pub use gaze::{
    default_observers, gen_gaze, random_display_records, GazeScene, ObserverModel, ScreenSetup,
    SyntheticGaze, DWELL_SHAPE,
};
pub use render::render;
pub use scenario::{Benchmark, BenchmarkSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SlideSpec {
    pub n_images: usize,
    pub size: ImageSize,
    /// Poisson mean of mitoses on a positive image (zero-truncated, so every
    /// positive image has at least one).
    pub mitosis_rate: f64,
    /// Poisson mean of brown artifacts per image.
    pub distractor_rate: f64,
    /// Background nuclei per megapixel.
    pub nuclei_density: f64,
    pub positive_fraction: f64,
    /// Minimum distance between any two planted objects, in pixels.
    pub min_separation: f64,
    /// Planted objects keep at least this distance from the border.
    pub margin: f64,
    pub seed: u64,
}

impl Default for SlideSpec {
    fn default() -> Self {
        SlideSpec {
            n_images: 200,
            size: ImageSize::square(1600),
            mitosis_rate: 1.5,
            distractor_rate: 2.0,
            nuclei_density: 120.0,
            positive_fraction: 0.5,
            min_separation: 100.0,
            margin: 40.0,
            seed: 0,
        }
    }
}

impl SlideSpec {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.mitosis_rate,
            self.distractor_rate,
            self.nuclei_density,
            self.min_separation,
            self.margin,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("slide rates and distances must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return Err(Error::invalid("positive fraction must lie in [0, 1]"));
        }
        if self.size.width == 0 || self.size.height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        Ok(())
    }

    pub fn image_id(&self, index: usize) -> String {
        format!("img_{index:04}")
    }
}

/// Elliptical blob parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: ImagePoint,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.x, y - self.center.y);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }

    pub fn extent(&self) -> f64 {
        self.semi_major.max(self.semi_minor)
    }
}

/// Where everything on one synthetic image goes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLayout {
    pub index: usize,
    pub image_id: String,
    pub size: ImageSize,
    pub positive: bool,
    pub mitoses: Vec<Ellipse>,
    /// Each artifact is a union of small discs.
    pub distractors: Vec<Vec<Ellipse>>,
    pub nuclei: Vec<Ellipse>,
    pub(crate) noise_seed: u64,
}

impl ImageLayout {
    pub fn ground_truth(&self) -> Vec<ImagePoint> {
        self.mitoses.iter().map(|e| e.center).collect()
    }

    /// Anchor point of each artifact (the centre of its first disc).
    pub fn distractor_points(&self) -> Vec<ImagePoint> {
        self.distractors.iter().map(|d| d[0].center).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub layout: ImageLayout,
    pub image: image::RgbImage,
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

/// Which images are positive: exactly `round(n * positive_fraction)` of
/// them, chosen by a seeded shuffle.
fn positive_flags(spec: &SlideSpec) -> Vec<bool> {
    let n_pos = (spec.n_images as f64 * spec.positive_fraction).round() as usize;
    let mut order: Vec<usize> = (0..spec.n_images).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, u64::MAX, 0)));
    let mut flags = vec![false; spec.n_images];
    for &i in &order[..n_pos.min(spec.n_images)] {
        flags[i] = true;
    }
    flags
}

fn place(
    rng: &mut ChaCha8Rng,
    spec: &SlideSpec,
    taken: &mut Vec<ImagePoint>,
) -> Option<ImagePoint> {
    let (w, h) = (spec.size.width as f64, spec.size.height as f64);
    if w <= 2.0 * spec.margin || h <= 2.0 * spec.margin {
        return None;
    }
    for _ in 0..200 {
        let p = ImagePoint::new(
            rng.random_range(spec.margin..w - spec.margin),
            rng.random_range(spec.margin..h - spec.margin),
        );
        if taken.iter().all(|q| q.distance(&p) >= spec.min_separation) {
            taken.push(p);
            return Some(p);
        }
    }
    None
}

fn layout_with_flag(spec: &SlideSpec, index: usize, positive: bool) -> ImageLayout {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, index as u64, 1));
    let n_mitoses = if positive && spec.mitosis_rate > 0.0 {
        loop {
            let n = poisson(&mut rng, spec.mitosis_rate);
            if n > 0 {
                break n;
            }
        }
    } else {
        0
    };
    let n_distractors = poisson(&mut rng, spec.distractor_rate);
    let mut taken = Vec::new();

    let mut mitoses = Vec::with_capacity(n_mitoses);
    for _ in 0..n_mitoses {
        if let Some(center) = place(&mut rng, spec, &mut taken) {
            let semi_major = rng.random_range(13.0..19.0);
            mitoses.push(Ellipse {
                center,
                semi_major,
                semi_minor: semi_major * rng.random_range(0.65..0.9),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            });
        }
    }

    let mut distractors = Vec::with_capacity(n_distractors);
    for _ in 0..n_distractors {
        if let Some(center) = place(&mut rng, spec, &mut taken) {
            let n_lobes = rng.random_range(3..=5);
            let mut lobes = vec![Ellipse {
                center,
                semi_major: rng.random_range(8.0..11.0),
                semi_minor: rng.random_range(6.0..9.0),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            }];
            for _ in 1..n_lobes {
                let r = rng.random_range(5.0..12.0);
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let c = ImagePoint::new(center.x + r * a.cos(), center.y + r * a.sin());
                let s = rng.random_range(5.0..9.0);
                lobes.push(Ellipse {
                    center: c,
                    semi_major: s,
                    semi_minor: s * rng.random_range(0.6..1.0),
                    angle: rng.random_range(0.0..std::f64::consts::PI),
                });
            }
            distractors.push(lobes);
        }
    }

    let megapixels = spec.size.pixel_count() as f64 / 1e6;
    let n_nuclei = poisson(&mut rng, spec.nuclei_density * megapixels);
    let (w, h) = (spec.size.width as f64, spec.size.height as f64);
    let nuclei = (0..n_nuclei)
        .map(|_| {
            let a = rng.random_range(5.0..9.0);
            Ellipse {
                center: ImagePoint::new(rng.random_range(0.0..w), rng.random_range(0.0..h)),
                semi_major: a,
                semi_minor: a * rng.random_range(0.6..0.95),
                angle: rng.random_range(0.0..std::f64::consts::PI),
            }
        })
        .collect();

    ImageLayout {
        index,
        image_id: spec.image_id(index),
        size: spec.size,
        positive,
        mitoses,
        distractors,
        nuclei,
        noise_seed: mix_seed(spec.seed, index as u64, 2),
    }
}

/// Object placement for every image, without rendering pixels.
pub fn layouts(spec: &SlideSpec) -> Result<Vec<ImageLayout>> {
    spec.validate()?;
    Ok(positive_flags(spec)
        .into_iter()
        .enumerate()
        .map(|(i, positive)| layout_with_flag(spec, i, positive))
        .collect())
}

/// Generate and render every image of the slide set.
pub fn gen_slide(spec: &SlideSpec, execution: Execution) -> Result<Vec<SyntheticImage>> {
    let layouts = layouts(spec)?;
    Ok(execution.map(&layouts, |layout| SyntheticImage {
        image: render(layout),
        layout: layout.clone(),
    }))
}
