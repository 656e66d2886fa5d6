//! `gazelabel`: simulate data, distill consensus gaze labels, run the color
//! baseline, evaluate, sweep group sizes and train the reference detector.

mod commands;
mod config;
mod dataset;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments. Exit code 1.
    Validation(String),
    /// Anything that went wrong while running. Exit code 2.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<gazelabel::Error> for CliError {
    fn from(e: gazelabel::Error) -> Self {
        use gazelabel::Error as E;
        match e {
            E::InvalidParameter(_) | E::GroupTooLarge { .. } | E::ImageTooSmall { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gazelabel", version, about = "Consensus eye-gaze labels for mitosis detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command. Each flag overrides the config key
/// named in its help text.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file with `key = value` lines under `[section]` headers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// `seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Group size (`distill.k`).
    #[arg(long, global = true)]
    k: Option<usize>,
    /// `distill.sigma`
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// `distill.truncation_radius`
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// `distill.threshold_coef`
    #[arg(long, global = true)]
    threshold_coef: Option<f64>,
    /// `distill.min_area`
    #[arg(long, global = true)]
    min_area: Option<usize>,
    /// `eval.match_radius`
    #[arg(long, global = true)]
    match_radius: Option<f64>,
    /// Run on one thread (`sequential`).
    #[arg(long, global = true)]
    sequential: bool,
    /// Any config key, as `section.key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset: images/, gt.csv, distractors.csv,
    /// gaze.jsonl, display.jsonl.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Consensus labels from gaze logs.
    Distill {
        /// Dataset directory with gaze.jsonl and display.jsonl.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Brown-color baseline labels from images.
    Heuristic {
        /// Dataset directory with images/.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Precision, recall and F1 of a label file against ground truth.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Label quality over group sizes and random participant subsets.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the reference detector on a label file and evaluate it on a
    /// held-out dataset.
    TrainDetect {
        /// Training dataset; every fifth image (by name) is held out for
        /// validation.
        #[arg(long)]
        data: PathBuf,
        /// Point labels for the training images (`image_id,x,y,...`).
        #[arg(long)]
        labels: PathBuf,
        /// Test dataset with images/ and gt.csv.
        #[arg(long)]
        test_data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn build_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    if let Some(path) = &common.config {
        c.apply_file(path)?;
    }
    let flags: [(&str, Option<String>); 7] = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("distill.k", common.k.map(|v| v.to_string())),
        ("distill.sigma", common.sigma.map(|v| v.to_string())),
        ("distill.truncation_radius", common.radius.map(|v| v.to_string())),
        ("distill.threshold_coef", common.threshold_coef.map(|v| v.to_string())),
        ("distill.min_area", common.min_area.map(|v| v.to_string())),
        ("eval.match_radius", common.match_radius.map(|v| v.to_string())),
    ];
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got {o:?}")))?;
        c.set(k.trim(), v)?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            c.set(key, &v)?;
        }
    }
    if common.sequential {
        c.sequential = true;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate { common }
        | Command::Distill { common, .. }
        | Command::Heuristic { common, .. }
        | Command::Eval { common, .. }
        | Command::Sweep { common, .. }
        | Command::TrainDetect { common, .. } => common.clone(),
    };
    let config = build_config(&common)?;
    let out = commands::Output::open(&common.out, &config)?;
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&config, &out),
        Command::Distill { data, .. } => commands::distill(&config, &data, &out),
        Command::Heuristic { data, .. } => commands::heuristic(&config, &data, &out),
        Command::Eval { labels, gt, .. } => commands::eval(&config, &labels, &gt, &out),
        Command::Sweep { data, .. } => commands::sweep(&config, &data, &out),
        Command::TrainDetect {
            data,
            labels,
            test_data,
            ..
        } => commands::train_detect(&config, &data, &labels, &test_data, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazelabel: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 1,
                CliError::Runtime(_) => 2,
            })
        }
    }
}
