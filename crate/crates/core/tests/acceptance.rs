//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use gazelabel::consensus::{accumulate_heatmap, distill_labels, DistillParams};
use gazelabel::detect::{
    detect, train_two_iteration, windows, Detection, HsvBinMap, LabeledImage, OcclusionSaliency,
    OracleClassifier, PipelineParams, ReferenceClassifier, TrainConfig, N_BINS,
};
use gazelabel::eval::{
    detections_by_image, group_size_sweep, match_points, pooled_prf, pr_curve, uniform_thresholds,
    PointsByImage, PrPoint, SweepConfig, SweepSummary, DEFAULT_MATCH_RADIUS,
};
use gazelabel::gaze::{project_to_image, Viewport};
use gazelabel::heuristic::{detect_brown, HsvRange};
use gazelabel::synth::{gen_slide, Benchmark, BenchmarkSpec, SlideSpec};
use gazelabel::{DisplayRecord, Execution, Flip, GazePoint, ImagePoint, ImageSize, Rotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1}s of {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64())
}

fn projection_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut outside = 0;
    for rotation in Rotation::ALL {
        for flip in Flip::ALL {
            let size = ImageSize::new(rng.random_range(50..3000), rng.random_range(50..3000));
            let record = DisplayRecord {
                participant_id: None,
                image_id: "img".into(),
                rotation,
                flip,
                viewport: Viewport {
                    origin_x: rng.random_range(-500.0..500.0),
                    origin_y: rng.random_range(-500.0..500.0),
                    scale: rng.random_range(0.1..4.0),
                },
                image_size: size,
            };
            let (dw, dh) = record.displayed_size();
            let vp = record.viewport;
            for _ in 0..1000 {
                let p = ImagePoint::new(
                    rng.random_range(0.0..size.width as f64),
                    rng.random_range(0.0..size.height as f64),
                );
                let (sx, sy) = record.image_to_screen(p);
                // The forward map must land inside the displayed rectangle.
                let (u, v) = ((sx - vp.origin_x) / vp.scale, (sy - vp.origin_y) / vp.scale);
                if !(-1e-9..=dw + 1e-9).contains(&u) || !(-1e-9..=dh + 1e-9).contains(&v) {
                    outside += 1;
                }
                let back = project_to_image(&GazePoint::new(0.0, sx, sy, 1.0), &record)
                    .expect("valid sample");
                worst = worst.max(back.distance(&p));
            }
        }
    }
    let limit = Duration::from_secs(1);
    let elapsed = t.elapsed();
    outcome(
        worst <= 1e-9 && outside == 0 && elapsed < limit,
        format!(
            "max error {worst:.2e} px over 12 x 1000 points, {outside} off-display, {}",
            within(elapsed, limit)
        ),
    )
}

fn heatmap_mass_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let size = ImageSize::new(rng.random_range(20..400), rng.random_range(20..400));
        let params = DistillParams {
            sigma: rng.random_range(1.0..20.0),
            ..DistillParams::default()
        };
        let params = DistillParams {
            truncation_radius: params.sigma * rng.random_range(1.0..4.0),
            ..params
        };
        let n = rng.random_range(1..200);
        let points: Vec<ImagePoint> = (0..n)
            .map(|_| {
                ImagePoint::new(
                    rng.random_range(0.0..size.width as f64),
                    rng.random_range(0.0..size.height as f64),
                )
            })
            .collect();
        let map = accumulate_heatmap(&points, size, &params, 3).expect("valid heatmap");
        worst = worst.max((map.total_mass() - n as f64).abs() / n as f64);
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} over 100 sets"))
}

/// Largest number of within-radius pairs, then smallest total distance, by
/// trying every assignment of each prediction to a free truth or to nothing.
fn exhaustive_match(pred: &[ImagePoint], gt: &[ImagePoint], radius: f64) -> (usize, f64) {
    fn go(i: usize, pred: &[ImagePoint], gt: &[ImagePoint], used: &mut [bool], r: f64) -> (usize, f64) {
        if i == pred.len() {
            return (0, 0.0);
        }
        let mut best = go(i + 1, pred, gt, used, r);
        for j in 0..gt.len() {
            let d = pred[i].distance(&gt[j]);
            if used[j] || d > r {
                continue;
            }
            used[j] = true;
            let (n, cost) = go(i + 1, pred, gt, used, r);
            used[j] = false;
            let cand = (n + 1, cost + d);
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
            }
        }
        best
    }
    go(0, pred, gt, &mut vec![false; gt.len()], radius)
}

fn matching_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..500 {
        let (np, ng) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let mut cloud = |n: usize| -> Vec<ImagePoint> {
            (0..n)
                .map(|_| ImagePoint::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect()
        };
        let (pred, gt) = (cloud(np), cloud(ng));
        let radius = rng.random_range(5.0..60.0);
        let m = match_points(&pred, &gt, radius);
        let (n, cost) = exhaustive_match(&pred, &gt, radius);
        let one_to_one = {
            let p: BTreeSet<usize> = m.pairs.iter().map(|x| x.0).collect();
            let g: BTreeSet<usize> = m.pairs.iter().map(|x| x.1).collect();
            p.len() == m.tp() && g.len() == m.tp()
        };
        if m.tp() != n || (m.total_distance() - cost).abs() > 1e-9 || !one_to_one {
            mismatches += 1;
        }
    }
    let limit = Duration::from_secs(10);
    let elapsed = t.elapsed();
    outcome(
        mismatches == 0 && elapsed < limit,
        format!("{mismatches} of 500 instances differ, {}", within(elapsed, limit)),
    )
}

fn summary(rows: &[SweepSummary], k: usize) -> &SweepSummary {
    rows.iter().find(|s| s.k == k).expect("k swept")
}

fn precision_trend(rows: &[SweepSummary], elapsed: Duration) -> Outcome {
    let p: Vec<f64> = [3, 7, 12]
        .iter()
        .map(|&k| summary(rows, k).precision.expect("runs succeeded").mean)
        .collect();
    let limit = Duration::from_secs(300);
    outcome(
        p[0] < p[1] && p[1] < p[2] && p[2] - p[0] >= 0.1 && elapsed < limit,
        format!(
            "mean precision k=3 {:.3}, k=7 {:.3}, k=12 {:.3}, {}",
            p[0],
            p[1],
            p[2],
            within(elapsed, limit)
        ),
    )
}

fn recall_spread(rows: &[SweepSummary]) -> Outcome {
    let iqr = |k| summary(rows, k).recall.expect("runs succeeded").iqr();
    let (i4, i12) = (iqr(4), iqr(12));
    outcome(i12 < i4, format!("recall IQR k=4 {i4:.4}, k=12 {i12:.4}"))
}

fn heuristic_vs_consensus(bench: &Benchmark, rows: &[SweepSummary]) -> Outcome {
    let labels: Vec<(String, Vec<ImagePoint>)> =
        Execution::default().map_range(bench.layouts.len(), |i| {
            let id = &bench.layouts[i].image_id;
            let found = detect_brown(&bench.render(i), &HsvRange::default(), id);
            (id.clone(), found.iter().map(|l| l.point()).collect())
        });
    let heur = pooled_prf(&labels.into_iter().collect(), &bench.ground_truth(), DEFAULT_MATCH_RADIUS);
    let k12 = summary(rows, 12);
    let (cp, cr) = (k12.precision.unwrap().mean, k12.recall.unwrap().mean);
    outcome(
        heur.recall >= cr && heur.precision <= cp - 0.05,
        format!(
            "heuristic P {:.3} R {:.3}, consensus k=12 P {cp:.3} R {cr:.3}",
            heur.precision, heur.recall
        ),
    )
}

struct DetectorRun {
    outcome: Outcome,
    curves: Vec<Vec<PrPoint>>,
}

fn detector_ordering(bench: &Benchmark) -> DetectorRun {
    let t = Instant::now();
    let (n_train, n_val, n_test, n_seeds) = (60, 15, 30, 5);
    let n = n_train + n_val;
    let images: Vec<_> = Execution::default().map_range(n, |i| bench.render(i));
    let layouts = &bench.layouts[..n];

    let truth: Vec<Vec<ImagePoint>> = layouts.iter().map(|l| l.ground_truth()).collect();
    let everyone: BTreeSet<String> = bench.participants.iter().map(|p| p.0.clone()).collect();
    let sequences = bench.sequences_by_image();
    let eye: Vec<Vec<ImagePoint>> = layouts
        .iter()
        .map(|l| {
            let seqs = sequences.get(&l.image_id).map(Vec::as_slice).unwrap_or(&[]);
            distill_labels(seqs, &everyone, &DistillParams::default(), 0.5)
                .expect("distillation succeeds")
                .iter()
                .map(|c| c.point())
                .collect()
        })
        .collect();
    let heur: Vec<Vec<ImagePoint>> = images
        .iter()
        .zip(layouts)
        .map(|(im, l)| {
            detect_brown(im, &HsvRange::default(), &l.image_id)
                .iter()
                .map(|c| c.point())
                .collect()
        })
        .collect();

    let test_spec = SlideSpec {
        n_images: n_test,
        seed: 999,
        ..BenchmarkSpec::default().slide
    };
    let test = gen_slide(&test_spec, Execution::default()).expect("test slide");
    let test_truth: PointsByImage = test
        .iter()
        .map(|s| (s.layout.image_id.clone(), s.layout.ground_truth()))
        .collect();

    let mut curves = Vec::new();
    let mut f1 = Vec::new();
    for labels in [&truth, &eye, &heur] {
        let labeled: Vec<LabeledImage> = images
            .iter()
            .zip(labels)
            .map(|(image, labels)| LabeledImage { image, labels })
            .collect();
        let mut sum = 0.0;
        for seed in 0..n_seeds {
            let config = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let report = train_two_iteration(
                &labeled[..n_train],
                &labeled[n_train..],
                ReferenceClassifier::default(),
                &config,
            )
            .expect("training succeeds");
            let detections: Vec<Detection> = test
                .iter()
                .flat_map(|s| {
                    detect(
                        &s.image,
                        &s.layout.image_id,
                        &report.classifier,
                        &OcclusionSaliency::default(),
                        &PipelineParams::default(),
                        Execution::default(),
                    )
                    .expect("detection succeeds")
                })
                .collect();
            let kept = detections_by_image(detections.iter().filter(|d| d.probability >= 0.5));
            sum += pooled_prf(&kept, &test_truth, DEFAULT_MATCH_RADIUS).f1;
            curves.push(pr_curve(
                &detections,
                &test_truth,
                DEFAULT_MATCH_RADIUS,
                &uniform_thresholds(21),
            ));
        }
        f1.push(sum / n_seeds as f64);
    }
    let (gt, eye, heur) = (f1[0], f1[1], f1[2]);
    let limit = Duration::from_secs(600);
    let elapsed = t.elapsed();
    DetectorRun {
        outcome: outcome(
            heur < eye && eye <= gt + 0.02 && gt - eye <= 0.1 && elapsed < limit,
            format!(
                "mean F1 over {n_seeds} seeds: ground truth {gt:.3}, eye-gaze {eye:.3}, heuristic {heur:.3}, {}",
                within(elapsed, limit)
            ),
        ),
        curves,
    }
}

fn oracle_pipeline(bench: &Benchmark) -> Outcome {
    let n_windows = windows(ImageSize::square(1600), 240, 60).len();
    let n = 40;
    let mut found = PointsByImage::new();
    for (i, layout) in bench.layouts[..n].iter().enumerate() {
        let oracle = OracleClassifier::new(layout.ground_truth());
        let dets = detect(
            &bench.render(i),
            &layout.image_id,
            &oracle,
            &OcclusionSaliency::default(),
            &PipelineParams::default(),
            Execution::default(),
        )
        .expect("detection succeeds");
        found.extend(detections_by_image(dets.iter().filter(|d| d.probability >= 0.5)));
    }
    let truth: PointsByImage = bench.layouts[..n]
        .iter()
        .map(|l| (l.image_id.clone(), l.ground_truth()))
        .collect();
    let m = pooled_prf(&found, &truth, DEFAULT_MATCH_RADIUS);
    outcome(
        m.recall >= 0.95 && n_windows == 529,
        format!(
            "recall {:.3} ({} of {}) on {n} images, {n_windows} windows per 1600 px image",
            m.recall,
            m.tp,
            m.tp + m.fn_
        ),
    )
}

fn gradient_check(bench: &Benchmark) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bins = HsvBinMap::from_image(&bench.render(0));
    let all = windows(bins.size(), 240, 60);
    let (h, l2) = (1e-5, 1e-3);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let weights = (0..N_BINS).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c = ReferenceClassifier::new(weights, rng.random_range(-2.0..2.0)).expect("finite");
        let x = bins.histogram(all[rng.random_range(0..all.len())]);
        let label = trial % 2 == 0;
        let (gw, gb) = c.gradient(&x, label, l2);
        let loss = |w: &[f64], b: f64| {
            ReferenceClassifier::new(w.to_vec(), b)
                .unwrap()
                .log_loss(&x, label, l2)
        };
        let mut rel = |analytic: f64, numeric: f64| {
            let r = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(r);
        };
        for i in 0..N_BINS {
            let mut w = c.weights().to_vec();
            w[i] += h;
            let plus = loss(&w, c.bias());
            w[i] -= 2.0 * h;
            let minus = loss(&w, c.bias());
            rel(gw[i], (plus - minus) / (2.0 * h));
        }
        let plus = loss(c.weights(), c.bias() + h);
        let minus = loss(c.weights(), c.bias() - h);
        rel(gb, (plus - minus) / (2.0 * h));
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 10 x 513 parameters"))
}

fn pr_monotone(curves: &[Vec<PrPoint>]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut all = curves.to_vec();
    for _ in 0..200 {
        let mut truth = PointsByImage::new();
        let mut dets = Vec::new();
        for img in 0..3 {
            let id = format!("img_{img}");
            let gt: Vec<ImagePoint> = (0..rng.random_range(0..6))
                .map(|_| ImagePoint::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0)))
                .collect();
            truth.insert(id.clone(), gt);
            for _ in 0..rng.random_range(0..10) {
                dets.push(Detection {
                    image_id: id.clone(),
                    x: rng.random_range(0.0..300.0),
                    y: rng.random_range(0.0..300.0),
                    probability: rng.random(),
                });
            }
        }
        all.push(pr_curve(&dets, &truth, DEFAULT_MATCH_RADIUS, &uniform_thresholds(21)));
    }
    let bad = all
        .iter()
        .filter(|c| c.windows(2).any(|w| w[1].recall > w[0].recall))
        .count();
    outcome(
        bad == 0 && !curves.is_empty(),
        format!(
            "{bad} of {} curves increase ({} from trained detectors)",
            all.len(),
            curves.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("projection round trip", projection_round_trip());
    report("heatmap mass conservation", heatmap_mass_conservation());
    report("matching equals exhaustive search", matching_oracle());

    let t = Instant::now();
    let bench = Benchmark::generate(&BenchmarkSpec::default(), Execution::default())
        .expect("benchmark generation");
    let config = SweepConfig {
        k_values: vec![3, 4, 7, 12],
        ..SweepConfig::default()
    };
    let table = group_size_sweep(&bench.sequences_by_image(), &bench.ground_truth(), &config)
        .expect("sweep succeeds");
    let rows = table.summary();
    report("precision rises with group size", precision_trend(&rows, t.elapsed()));
    report("recall spread shrinks with group size", recall_spread(&rows));
    report("heuristic labels over-detect", heuristic_vs_consensus(&bench, &rows));

    report("oracle pipeline", oracle_pipeline(&bench));
    report("gradient check", gradient_check(&bench));

    let run = detector_ordering(&bench);
    report("detector ordering by label source", run.outcome);
    report("PR recall non-increasing", pr_monotone(&run.curves));

    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
