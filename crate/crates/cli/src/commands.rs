use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use gazelabel::consensus::{distill_labels, sample_groups, ConsensusLabel};
use gazelabel::detect::{
    detect, train_two_iteration, Detection, LabeledImage, OcclusionSaliency, ReferenceClassifier,
    TrainConfig,
};
use gazelabel::eval::{
    detections_by_image, group_size_sweep, pooled_prf, pr_curve, uniform_thresholds,
    MetricsReport, Stats, SweepConfig,
};
use gazelabel::gaze::{write_display_log, write_gaze_log};
use gazelabel::heuristic::detect_brown;
use gazelabel::synth::{render, Benchmark, BenchmarkSpec};
use gazelabel::{io, Error, ImagePoint};

use crate::config::RunConfig;
use crate::dataset::{self, image_paths, read_gaze, read_points};
use crate::lock::DirLock;
use crate::CliError;

/// A locked output directory. Every file written through it starts with the
/// run header, and `run.txt` records the full configuration.
pub struct Output {
    pub dir: PathBuf,
    header: Vec<String>,
    _lock: DirLock,
}

impl Output {
    pub fn open(dir: &Path, config: &RunConfig) -> Result<Output, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let lock = DirLock::acquire(dir)?;
        let out = Output {
            dir: dir.to_path_buf(),
            header: config.header(),
            _lock: lock,
        };
        let mut w = out.create("run.txt")?;
        let mut text = format!("# {}\n", out.header[0]);
        for (k, v) in config.entries() {
            text.push_str(&format!("{k} = {v}\n"));
        }
        w.write_all(text.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn create(&self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
        }
        Ok(io::create(&path)?)
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn simulate(config: &RunConfig, out: &Output) -> Result<(), CliError> {
    let mut spec: BenchmarkSpec = config.sim.clone();
    spec.slide.seed = config.seed;
    spec.gaze_seed = config.seed.wrapping_add(1);
    let execution = config.execution();
    let bench = Benchmark::generate(&spec, execution)?;

    let images = out.path(dataset::IMAGES);
    std::fs::create_dir_all(&images).map_err(runtime)?;
    let written: Vec<gazelabel::Result<()>> = execution.map(&bench.layouts, |layout| {
        io::write_png(&images.join(format!("{}.png", layout.image_id)), &render(layout))
    });
    written.into_iter().collect::<gazelabel::Result<()>>()?;

    let gt = bench.ground_truth();
    let distractors = bench
        .layouts
        .iter()
        .map(|l| (l.image_id.clone(), l.distractor_points()))
        .collect();
    io::write_points(out.create(dataset::GT)?, &gt, out.header())?;
    io::write_points(out.create(dataset::DISTRACTORS)?, &distractors, out.header())?;
    write_gaze_log(out.create(dataset::GAZE)?, &bench.gaze.sequences)?;
    write_display_log(out.create(dataset::DISPLAY)?, &bench.gaze.displays)?;
    println!(
        "wrote {} images, {} objects, {} gaze sequences to {}",
        bench.layouts.len(),
        gt.values().map(Vec::len).sum::<usize>(),
        bench.gaze.sequences.len(),
        out.dir.display()
    );
    Ok(())
}

pub fn distill(config: &RunConfig, data: &Path, out: &Output) -> Result<(), CliError> {
    let by_image = read_gaze(data)?;
    let participants: Vec<String> = by_image
        .values()
        .flatten()
        .map(|s| s.participant_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = config.k.unwrap_or(participants.len());
    if k > participants.len() {
        return Err(Error::GroupTooLarge {
            k,
            available: participants.len(),
        }
        .into());
    }
    let chosen: BTreeSet<String> = if k == participants.len() {
        participants.iter().cloned().collect()
    } else {
        sample_groups(&participants, k, 1, config.seed)?
            .remove(0)
            .into_iter()
            .collect()
    };
    let images: Vec<_> = by_image.values().collect();
    let per_image = config.execution().map(&images, |seqs| {
        distill_labels(seqs, &chosen, &config.distill, config.confidence_min)
    });
    let mut labels: Vec<ConsensusLabel> = Vec::new();
    for l in per_image {
        labels.extend(l?);
    }
    let mut header = out.header().to_vec();
    header.push(format!(
        "k={k} participants={}",
        chosen.iter().cloned().collect::<Vec<_>>().join(" ")
    ));
    io::write_labels(out.create("labels.csv")?, &labels, &header)?;
    println!("{} labels from {} images at k={k}", labels.len(), images.len());
    Ok(())
}

pub fn heuristic(config: &RunConfig, data: &Path, out: &Output) -> Result<(), CliError> {
    let paths = image_paths(data)?;
    let per_image = config.execution().map(&paths, |(id, path)| {
        io::read_png(path).map(|img| detect_brown(&img, &config.hsv, id))
    });
    let mut labels = Vec::new();
    for l in per_image {
        labels.extend(l?);
    }
    io::write_labels(out.create("labels.csv")?, &labels, out.header())?;
    println!("{} labels from {} images", labels.len(), paths.len());
    Ok(())
}

/// `name,precision,recall,f1,tp,fp,fn`, then any `extra` lines verbatim.
fn write_metrics(
    out: &Output,
    rows: &[(String, MetricsReport)],
    extra: &[String],
    radius: f64,
) -> Result<(), CliError> {
    let mut w = out.create("metrics.csv")?;
    let mut text = String::new();
    for h in out.header() {
        text.push_str(&format!("# {h}\n"));
    }
    text.push_str(&format!("# match_radius={radius}\n"));
    text.push_str("name,precision,recall,f1,tp,fp,fn\n");
    for (name, m) in rows {
        text.push_str(&format!(
            "{name},{},{},{},{},{},{}\n",
            m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_
        ));
    }
    for line in extra {
        text.push_str(line);
        text.push('\n');
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(runtime)
}

pub fn eval(config: &RunConfig, labels: &Path, gt: &Path, out: &Output) -> Result<(), CliError> {
    let gt = read_points(gt)?;
    let pred = read_points(labels)?;
    let m = pooled_prf(&pred, &gt, config.match_radius);
    write_metrics(out, &[("labels".to_string(), m)], &[], config.match_radius)?;
    println!(
        "precision {:.4} recall {:.4} f1 {:.4} (tp {} fp {} fn {})",
        m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_
    );
    Ok(())
}

pub fn sweep(config: &RunConfig, data: &Path, out: &Output) -> Result<(), CliError> {
    let by_image = read_gaze(data)?;
    let gt = read_points(&data.join(dataset::GT))?;
    let n = by_image
        .values()
        .flatten()
        .map(|s| s.participant_id.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    let k_max = config.sweep_k_max.unwrap_or(n);
    let sweep_config = SweepConfig {
        k_values: (config.sweep_k_min..=k_max).collect(),
        n_runs: config.sweep_runs,
        params: config.distill,
        confidence_min: config.confidence_min,
        radius: config.match_radius,
        seed: config.seed,
        execution: config.execution(),
    };
    if sweep_config.k_values.is_empty() {
        return Err(CliError::Validation(format!(
            "empty k range {}..={k_max}",
            config.sweep_k_min
        )));
    }
    let table = group_size_sweep(&by_image, &gt, &sweep_config)?;
    let mut header = out.header().to_vec();
    header.push(format!("match_radius={}", table.radius));
    io::write_sweep(out.create("sweep.csv")?, &table, &header)?;
    io::write_sweep_summary(out.create("sweep_summary.csv")?, &table, &header)?;
    for s in table.summary() {
        let mean = |st: Option<Stats>| st.map_or(f64::NAN, |s| s.mean);
        println!(
            "k={:2} precision {:.3} recall {:.3} f1 {:.3} ({} runs)",
            s.k,
            mean(s.precision),
            mean(s.recall),
            mean(s.f1),
            s.runs_ok
        );
    }
    Ok(())
}

pub fn train_detect(
    config: &RunConfig,
    data: &Path,
    labels: &Path,
    test_data: &Path,
    out: &Output,
) -> Result<(), CliError> {
    let execution = config.execution();
    let labels = read_points(labels)?;
    let train_paths = image_paths(data)?;
    let train_images: Vec<gazelabel::Result<_>> =
        execution.map(&train_paths, |(_, p)| io::read_png(p));
    let train_images = train_images
        .into_iter()
        .collect::<gazelabel::Result<Vec<_>>>()?;
    let empty: Vec<ImagePoint> = Vec::new();
    let labeled: Vec<LabeledImage> = train_paths
        .iter()
        .zip(&train_images)
        .map(|((id, _), image)| LabeledImage {
            image,
            labels: labels.get(id).unwrap_or(&empty),
        })
        .collect();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, l) in labeled.into_iter().enumerate() {
        if i % 5 == 4 {
            val.push(l);
        } else {
            train.push(l);
        }
    }

    let test_paths = image_paths(test_data)?;
    let test_gt = read_points(&test_data.join(dataset::GT))?;
    let test_images = execution.map(&test_paths, |(_, p)| io::read_png(p));
    let test_images = test_images
        .into_iter()
        .collect::<gazelabel::Result<Vec<_>>>()?;

    let thresholds = uniform_thresholds(config.pr_points);
    let mut rows = Vec::new();
    for s in 0..config.train_seeds {
        let seed = config.seed.wrapping_add(s as u64);
        let train_config = TrainConfig {
            seed,
            execution,
            ..config.train
        };
        let report = train_two_iteration(&train, &val, ReferenceClassifier::default(), &train_config)?;
        for w in &report.warnings {
            eprintln!("gazelabel: seed {seed}: {w}");
        }
        let dir = format!("seed_{seed}");
        std::fs::create_dir_all(out.path(&dir)).map_err(runtime)?;
        io::write_classifier(&out.path(&format!("{dir}/model.txt")), &report.classifier)?;
        let mut detections: Vec<Detection> = Vec::new();
        for ((id, _), image) in test_paths.iter().zip(&test_images) {
            detections.extend(detect(
                image,
                id,
                &report.classifier,
                &OcclusionSaliency {
                    params: config.pipeline.occlusion,
                },
                &config.pipeline,
                execution,
            )?);
        }
        let mut header = out.header().to_vec();
        header.push(format!("train_seed={seed}"));
        io::write_detections(out.create(&format!("{dir}/detections.csv"))?, &detections, &header)?;
        let curve = pr_curve(&detections, &test_gt, config.match_radius, &thresholds);
        io::write_pr_curve(out.create(&format!("{dir}/pr_curve.csv"))?, &curve, &header)?;
        let kept = detections_by_image(
            detections
                .iter()
                .filter(|d| d.probability >= config.pipeline.positive_threshold),
        );
        let m = pooled_prf(&kept, &test_gt, config.match_radius);
        println!(
            "seed {seed}: precision {:.4} recall {:.4} f1 {:.4} (validation f1 {:.4})",
            m.precision,
            m.recall,
            m.f1,
            report.iterations.last().map_or(f64::NAN, |i| i.val_f1)
        );
        rows.push((format!("seed_{seed}"), m));
    }
    let summary = |f: fn(&MetricsReport) -> f64| {
        Stats::from_values(&rows.iter().map(|(_, m)| f(m)).collect::<Vec<_>>())
    };
    let (p, r, f) = (
        summary(|m| m.precision),
        summary(|m| m.recall),
        summary(|m| m.f1),
    );
    let mut extra = Vec::new();
    if let (Some(p), Some(r), Some(f)) = (p, r, f) {
        extra.push(format!("mean,{},{},{},,,", p.mean, r.mean, f.mean));
        extra.push(format!("std,{},{},{},,,", p.std, r.std, f.std));
        println!("mean f1 {:.4} (std {:.4})", f.mean, f.std);
    }
    write_metrics(out, &rows, &extra, config.match_radius)
}
