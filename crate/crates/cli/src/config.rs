//! Run configuration: defaults, a `key = value` file with `[section]`
//! headers, and command-line overrides, in that order of precedence.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use gazelabel::consensus::DistillParams;
use gazelabel::detect::{OcclusionParams, PipelineParams, TrainConfig};
use gazelabel::gaze::DEFAULT_CONFIDENCE_MIN;
use gazelabel::heuristic::HsvRange;
use gazelabel::synth::{BenchmarkSpec, ObserverModel, SlideSpec};
use gazelabel::ImageSize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub sequential: bool,
    pub distill: DistillParams,
    pub k: Option<usize>,
    pub confidence_min: f64,
    pub hsv: HsvRange,
    pub pipeline: PipelineParams,
    pub match_radius: f64,
    pub sweep_k_min: usize,
    pub sweep_k_max: Option<usize>,
    pub sweep_runs: usize,
    pub train: TrainConfig,
    pub train_seeds: usize,
    pub pr_points: usize,
    pub sim: BenchmarkSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            sequential: false,
            distill: DistillParams::default(),
            k: None,
            confidence_min: DEFAULT_CONFIDENCE_MIN,
            hsv: HsvRange::default(),
            pipeline: PipelineParams::default(),
            match_radius: gazelabel::eval::DEFAULT_MATCH_RADIUS,
            sweep_k_min: 3,
            sweep_k_max: None,
            sweep_runs: 20,
            train: TrainConfig::default(),
            train_seeds: 5,
            pr_points: 21,
            sim: BenchmarkSpec::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Validation(format!("{key}: cannot parse {value:?}: {e}")))
}

fn optional(value: &str) -> Option<&str> {
    match value.trim() {
        "" | "none" | "all" => None,
        v => Some(v),
    }
}

impl RunConfig {
    /// Set one `section.key` (or top-level `key`) from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "sequential" => self.sequential = parse(key, v)?,

            "distill.sigma" => self.distill.sigma = parse(key, v)?,
            "distill.truncation_radius" => self.distill.truncation_radius = parse(key, v)?,
            "distill.threshold_coef" => self.distill.threshold_coef = parse(key, v)?,
            "distill.min_area" => self.distill.min_area = parse(key, v)?,
            "distill.k" => {
                self.k = optional(v).map(|s| parse(key, s)).transpose()?;
            }
            "distill.confidence_min" => self.confidence_min = parse(key, v)?,

            "hsv.hue_min" => self.hsv.hue_min = parse(key, v)?,
            "hsv.hue_max" => self.hsv.hue_max = parse(key, v)?,
            "hsv.sat_min" => self.hsv.sat_min = parse(key, v)?,
            "hsv.sat_max" => self.hsv.sat_max = parse(key, v)?,
            "hsv.val_min" => self.hsv.val_min = parse(key, v)?,
            "hsv.val_max" => self.hsv.val_max = parse(key, v)?,
            "hsv.min_area" => self.hsv.min_area = parse(key, v)?,

            "pipeline.patch_size" => {
                self.pipeline.patch_size = parse(key, v)?;
                self.train.patch_size = self.pipeline.patch_size;
            }
            "pipeline.stride" => {
                self.pipeline.stride = parse(key, v)?;
                self.train.stride = self.pipeline.stride;
            }
            "pipeline.positive_threshold" => self.pipeline.positive_threshold = parse(key, v)?,
            "pipeline.mask_size" => self.pipeline.occlusion.mask_size = parse(key, v)?,
            "pipeline.mask_stride" => self.pipeline.occlusion.stride = parse(key, v)?,
            "pipeline.hotspot_fraction" => self.pipeline.hotspot_fraction = parse(key, v)?,
            "pipeline.hotspot_min_area" => self.pipeline.hotspot_min_area = parse(key, v)?,

            "eval.match_radius" => self.match_radius = parse(key, v)?,
            "eval.pr_points" => self.pr_points = parse(key, v)?,

            "sweep.k_min" => self.sweep_k_min = parse(key, v)?,
            "sweep.k_max" => {
                self.sweep_k_max = optional(v).map(|s| parse(key, s)).transpose()?;
            }
            "sweep.runs" => self.sweep_runs = parse(key, v)?,

            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, v)?,
            "train.l2" => self.train.l2 = parse(key, v)?,
            "train.margin_lo" => self.train.margin_lo = parse(key, v)?,
            "train.margin_hi" => self.train.margin_hi = parse(key, v)?,
            "train.seeds" => self.train_seeds = parse(key, v)?,

            "sim.images" => self.sim.slide.n_images = parse(key, v)?,
            "sim.size" => self.sim.slide.size = ImageSize::square(parse(key, v)?),
            "sim.mitosis_rate" => self.sim.slide.mitosis_rate = parse(key, v)?,
            "sim.distractor_rate" => self.sim.slide.distractor_rate = parse(key, v)?,
            "sim.nuclei_density" => self.sim.slide.nuclei_density = parse(key, v)?,
            "sim.positive_fraction" => self.sim.slide.positive_fraction = parse(key, v)?,
            "sim.min_separation" => self.sim.slide.min_separation = parse(key, v)?,
            "sim.margin" => self.sim.slide.margin = parse(key, v)?,
            "sim.observers" => self.sim.n_observers = parse(key, v)?,
            "sim.hit_rate" => self.sim.observer.hit_rate = parse(key, v)?,
            "sim.dwell_ms" => self.sim.observer.dwell_ms = parse(key, v)?,
            "sim.dispersion" => self.sim.observer.dispersion = parse(key, v)?,
            "sim.false_fixations" => self.sim.observer.false_fixations = parse(key, v)?,
            "sim.distractor_attraction" => self.sim.observer.distractor_attraction = parse(key, v)?,
            "sim.sample_rate" => self.sim.observer.sample_rate = parse(key, v)?,
            "sim.dropout" => self.sim.observer.dropout = parse(key, v)?,
            "sim.screen_width" => self.sim.screen.width = parse(key, v)?,
            "sim.screen_height" => self.sim.screen.height = parse(key, v)?,
            _ => return Err(CliError::Validation(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order. Feeding these back
    /// through [`set`](Self::set) reproduces the configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<usize>| v.map_or("all".to_string(), |k| k.to_string());
        let d = &self.distill;
        let h = &self.hsv;
        let p = &self.pipeline;
        let t = &self.train;
        let s: &SlideSpec = &self.sim.slide;
        let o: &ObserverModel = &self.sim.observer;
        vec![
            ("seed", self.seed.to_string()),
            ("sequential", self.sequential.to_string()),
            ("distill.sigma", d.sigma.to_string()),
            ("distill.truncation_radius", d.truncation_radius.to_string()),
            ("distill.threshold_coef", d.threshold_coef.to_string()),
            ("distill.min_area", d.min_area.to_string()),
            ("distill.k", opt(self.k)),
            ("distill.confidence_min", self.confidence_min.to_string()),
            ("hsv.hue_min", h.hue_min.to_string()),
            ("hsv.hue_max", h.hue_max.to_string()),
            ("hsv.sat_min", h.sat_min.to_string()),
            ("hsv.sat_max", h.sat_max.to_string()),
            ("hsv.val_min", h.val_min.to_string()),
            ("hsv.val_max", h.val_max.to_string()),
            ("hsv.min_area", h.min_area.to_string()),
            ("pipeline.patch_size", p.patch_size.to_string()),
            ("pipeline.stride", p.stride.to_string()),
            ("pipeline.positive_threshold", p.positive_threshold.to_string()),
            ("pipeline.mask_size", p.occlusion.mask_size.to_string()),
            ("pipeline.mask_stride", p.occlusion.stride.to_string()),
            ("pipeline.hotspot_fraction", p.hotspot_fraction.to_string()),
            ("pipeline.hotspot_min_area", p.hotspot_min_area.to_string()),
            ("eval.match_radius", self.match_radius.to_string()),
            ("eval.pr_points", self.pr_points.to_string()),
            ("sweep.k_min", self.sweep_k_min.to_string()),
            ("sweep.k_max", opt(self.sweep_k_max)),
            ("sweep.runs", self.sweep_runs.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.l2", t.l2.to_string()),
            ("train.margin_lo", t.margin_lo.to_string()),
            ("train.margin_hi", t.margin_hi.to_string()),
            ("train.seeds", self.train_seeds.to_string()),
            ("sim.images", s.n_images.to_string()),
            ("sim.size", s.size.width.to_string()),
            ("sim.mitosis_rate", s.mitosis_rate.to_string()),
            ("sim.distractor_rate", s.distractor_rate.to_string()),
            ("sim.nuclei_density", s.nuclei_density.to_string()),
            ("sim.positive_fraction", s.positive_fraction.to_string()),
            ("sim.min_separation", s.min_separation.to_string()),
            ("sim.margin", s.margin.to_string()),
            ("sim.observers", self.sim.n_observers.to_string()),
            ("sim.hit_rate", o.hit_rate.to_string()),
            ("sim.dwell_ms", o.dwell_ms.to_string()),
            ("sim.dispersion", o.dispersion.to_string()),
            ("sim.false_fixations", o.false_fixations.to_string()),
            ("sim.distractor_attraction", o.distractor_attraction.to_string()),
            ("sim.sample_rate", o.sample_rate.to_string()),
            ("sim.dropout", o.dropout.to_string()),
            ("sim.screen_width", self.sim.screen.width.to_string()),
            ("sim.screen_height", self.sim.screen.height.to_string()),
        ]
    }

    /// Apply a config file. `#` and `;` start comments; `[name]` prefixes
    /// the keys that follow with `name.`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "config line {}: expected key = value, found {raw:?}",
                    i + 1
                )));
            };
            let key = key.trim();
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&full, value)
                .map_err(|e| CliError::Validation(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |r: gazelabel::Result<()>| r.map_err(|e| CliError::Validation(e.to_string()));
        v(self.distill.validate())?;
        v(self.hsv.validate())?;
        v(self.pipeline.validate())?;
        v(self.train.validate())?;
        v(self.sim.slide.validate())?;
        v(self.sim.observer.validate())?;
        if self.k == Some(0) {
            return Err(CliError::Validation("k must be at least 1".into()));
        }
        if !(self.match_radius > 0.0 && self.match_radius.is_finite()) {
            return Err(CliError::Validation("match radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_min) {
            return Err(CliError::Validation("confidence_min must lie in [0, 1]".into()));
        }
        if self.sweep_runs == 0 || self.train_seeds == 0 || self.pr_points < 2 {
            return Err(CliError::Validation(
                "sweep.runs and train.seeds must be at least 1, eval.pr_points at least 2".into(),
            ));
        }
        if self.sim.n_observers == 0 {
            return Err(CliError::Validation("need at least one observer".into()));
        }
        let occ: OcclusionParams = self.pipeline.occlusion;
        if occ.mask_size > self.pipeline.patch_size {
            return Err(CliError::Validation("occlusion mask larger than the patch".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical `key=value` listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn header(&self) -> Vec<String> {
        vec![format!("gazelabel config_hash={} seed={}", self.hash(), self.seed)]
    }

    pub fn execution(&self) -> gazelabel::Execution {
        if self.sequential {
            gazelabel::Execution::Sequential
        } else {
            gazelabel::Execution::Parallel
        }
    }
}
