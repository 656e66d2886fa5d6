use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classifier::PatchClassifier;
use super::pipeline::{score_windows, windows};
use super::Rect;
use crate::eval::MetricsReport;
use crate::exec::Execution;
use crate::gaze::{ImagePoint, ImageSize};
use crate::{Error, Result};

/// A classifier that can be fitted one example at a time.
pub trait Trainable: PatchClassifier + Clone + Send {
    type Features: Clone + Send + Sync;

    fn features(&self, prepared: &Self::Prepared, window: Rect) -> Self::Features;

    fn predict_features(&self, features: &Self::Features) -> f64;

    fn sgd_step(&mut self, features: &Self::Features, label: bool, learning_rate: f64, l2: f64);
}

/// An image with point labels from any source.
#[derive(Debug, Clone, Copy)]
pub struct LabeledImage<'a> {
    pub image: &'a RgbImage,
    pub labels: &'a [ImagePoint],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub patch_size: u32,
    /// Window stride used when mining marginal windows.
    pub stride: u32,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Windows the first-iteration model scores inside this band are added
    /// to the second iteration.
    pub margin_lo: f64,
    pub margin_hi: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patch_size: 240,
            stride: 60,
            epochs: 30,
            learning_rate: 4.0,
            l2: 1e-6,
            margin_lo: 0.35,
            margin_hi: 0.65,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::invalid("patch size and stride must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("need at least one epoch"));
        }
        if !(self.learning_rate > 0.0 && self.l2 >= 0.0) {
            return Err(Error::invalid("learning rate must be positive and l2 non-negative"));
        }
        if !(0.0 <= self.margin_lo && self.margin_lo <= self.margin_hi && self.margin_hi <= 1.0) {
            return Err(Error::invalid("need 0 <= margin_lo <= margin_hi <= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// F1 of the selected checkpoint over the validation windows.
    pub val_f1: f64,
    /// 0 means the starting state was kept.
    pub best_epoch: usize,
    pub n_positive: usize,
    pub n_negative: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport<C> {
    pub classifier: C,
    pub iterations: Vec<IterationReport>,
    pub warnings: Vec<String>,
}

struct Sample<F> {
    features: F,
    label: bool,
}

fn linf(a: ImagePoint, b: ImagePoint) -> f64 {
    (a.x - b.x).abs().max((a.y - b.y).abs())
}

fn size_of(image: &RgbImage) -> ImageSize {
    ImageSize::new(image.width(), image.height())
}

/// Windows for the first iteration: one centred on every label, and the
/// same number of random windows whose centre is at least `patch / 2` from
/// every label (L∞). Returned per image.
fn plan_windows(
    images: &[LabeledImage],
    patch: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<(Rect, bool)>> {
    let mut plan: Vec<Vec<(Rect, bool)>> = vec![Vec::new(); images.len()];
    let mut n_pos = 0;
    for (i, img) in images.iter().enumerate() {
        for &p in img.labels {
            plan[i].push((Rect::centered_clamped(p, patch, size_of(img.image)), true));
            n_pos += 1;
        }
    }
    let half = patch as f64 / 2.0;
    for _ in 0..n_pos {
        for _attempt in 0..1000 {
            let i = rng.random_range(0..images.len());
            let size = size_of(images[i].image);
            let x = rng.random_range(0..=size.width - patch);
            let y = rng.random_range(0..=size.height - patch);
            let r = Rect::square(x, y, patch);
            if images[i].labels.iter().all(|&l| linf(l, r.center()) >= half) {
                plan[i].push((r, false));
                break;
            }
        }
    }
    plan
}

/// Label a window by the L∞ distance from its centre to the nearest point
/// label: positive within `patch / 4`, negative from `patch / 2`, `None` in
/// between.
fn proximity_label(window: Rect, labels: &[ImagePoint], patch: u32) -> Option<bool> {
    let c = window.center();
    let nearest = labels
        .iter()
        .map(|&l| linf(l, c))
        .fold(f64::INFINITY, f64::min);
    if nearest <= patch as f64 / 4.0 {
        Some(true)
    } else if nearest >= patch as f64 / 2.0 {
        Some(false)
    } else {
        None
    }
}

fn extract<C: Trainable>(
    classifier: &C,
    images: &[LabeledImage],
    plan: &[Vec<(Rect, bool)>],
) -> Vec<Sample<C::Features>> {
    let mut out = Vec::new();
    for (img, windows) in images.iter().zip(plan) {
        if windows.is_empty() {
            continue;
        }
        let prepared = classifier.prepare(img.image);
        out.extend(windows.iter().map(|&(r, label)| Sample {
            features: classifier.features(&prepared, r),
            label,
        }));
    }
    out
}

fn counts<F>(samples: &[Sample<F>]) -> (usize, usize) {
    let pos = samples.iter().filter(|s| s.label).count();
    (pos, samples.len() - pos)
}

/// F1 at probability 0.5, and mean log-loss.
fn score<C: Trainable>(classifier: &C, samples: &[Sample<C::Features>]) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut loss = 0.0;
    for s in samples {
        let p = classifier.predict_features(&s.features);
        let q = if s.label { p } else { 1.0 - p };
        loss -= q.max(1e-12).ln();
        match (p >= 0.5, s.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (
        MetricsReport::from_counts(tp, fp, fn_).f1,
        loss / samples.len().max(1) as f64,
    )
}

/// Run `epochs` passes of SGD starting from `start`. With a usable
/// validation set the checkpoint with the best validation F1 is returned,
/// ties going to the lower validation loss; the starting state competes as
/// epoch 0 when `include_start`. Without one, the last state is returned.
fn fit<C: Trainable>(
    start: &C,
    train: &[Sample<C::Features>],
    val: Option<&[Sample<C::Features>]>,
    config: &TrainConfig,
    include_start: bool,
    rng: &mut ChaCha8Rng,
) -> (C, f64, usize) {
    let better = |a: (f64, f64), b: (f64, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
    let mut current = start.clone();
    let mut best: Option<(C, (f64, f64), usize)> = match val {
        Some(v) if include_start => Some((current.clone(), score(&current, v), 0)),
        _ => None,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        for &i in &order {
            let s = &train[i];
            current.sgd_step(&s.features, s.label, config.learning_rate, config.l2);
        }
        if let Some(v) = val {
            let sc = score(&current, v);
            if best.as_ref().is_none_or(|b| better(sc, b.1)) {
                best = Some((current.clone(), sc, epoch));
            }
        }
    }
    match best {
        Some((c, (f1, _), epoch)) => (c, f1, epoch),
        None => {
            let f1 = val.map(|v| score(&current, v).0).unwrap_or(f64::NAN);
            (current, f1, config.epochs)
        }
    }
}

/// Two rounds of training. The first uses label-centred positives and
/// random negatives; the second continues from the first round's best
/// checkpoint with marginal windows added, labelled by distance to the
/// nearest point label (positive within `patch / 4`, negative from
/// `patch / 2`, skipped in between).
///
/// Checkpoints are scored on every sliding window of the validation images,
/// labelled by the same distance rule, so validation measures the task the
/// pipeline actually runs.
pub fn train_two_iteration<C: Trainable>(
    train: &[LabeledImage],
    val: &[LabeledImage],
    init: C,
    config: &TrainConfig,
) -> Result<TrainReport<C>> {
    config.validate()?;
    if train.iter().all(|t| t.labels.is_empty()) {
        return Err(Error::NoPositiveLabels);
    }
    for img in train.iter().chain(val) {
        let size = size_of(img.image);
        if size.width < config.patch_size || size.height < config.patch_size {
            return Err(Error::ImageTooSmall {
                width: size.width,
                height: size.height,
                patch: config.patch_size,
            });
        }
    }
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let train_plan = plan_windows(train, config.patch_size, &mut rng);
    let mut samples = extract(&init, train, &train_plan);
    let val_plan: Vec<Vec<(Rect, bool)>> = val
        .iter()
        .map(|img| {
            windows(size_of(img.image), config.patch_size, config.stride)
                .into_iter()
                .filter_map(|w| proximity_label(w, img.labels, config.patch_size).map(|l| (w, l)))
                .collect()
        })
        .collect();
    let val_samples = extract(&init, val, &val_plan);
    let (val_pos, _) = counts(&val_samples);
    let val_set = if val_pos == 0 {
        warnings.push(
            "validation set has no positive patches; keeping the last state of each iteration"
                .to_string(),
        );
        None
    } else {
        Some(val_samples.as_slice())
    };

    let (n_pos, n_neg) = counts(&samples);
    let (first, f1_first, epoch_first) = fit(&init, &samples, val_set, config, false, &mut rng);
    let mut iterations = vec![IterationReport {
        val_f1: f1_first,
        best_epoch: epoch_first,
        n_positive: n_pos,
        n_negative: n_neg,
    }];

    for img in train {
        let size = size_of(img.image);
        let prepared = first.prepare(img.image);
        let windows = score_windows(
            &first,
            &prepared,
            size,
            config.patch_size,
            config.stride,
            config.execution,
        );
        for w in windows {
            if w.probability < config.margin_lo || w.probability > config.margin_hi {
                continue;
            }
            let Some(label) = proximity_label(w.rect, img.labels, config.patch_size) else {
                continue;
            };
            samples.push(Sample {
                features: first.features(&prepared, w.rect),
                label,
            });
        }
    }
    let (n_pos, n_neg) = counts(&samples);
    let (second, f1_second, epoch_second) = fit(&first, &samples, val_set, config, true, &mut rng);
    iterations.push(IterationReport {
        val_f1: f1_second,
        best_epoch: epoch_second,
        n_positive: n_pos,
        n_negative: n_neg,
    });

    Ok(TrainReport {
        classifier: second,
        iterations,
        warnings,
    })
}
