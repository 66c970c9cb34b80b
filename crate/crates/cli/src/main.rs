mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "momentq", version)]
#[command(about = "Temporal moment NMS, label assignment, evaluation and diagnosis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct GlobalArgs {
    /// Flat TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for synthetic generation
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Reject out-of-range segments instead of clamping them
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub strict: Option<bool>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Suppress a prediction file and write the surviving predictions
    Nms(NmsArgs),
    /// Score predictions against ground truth (average mAP, Recall@kx)
    Eval(EvalArgs),
    /// Compare center sampling and SimOTA on a candidate file
    AssignSim(AssignArgs),
    /// Near-replicate, false-positive, false-negative and sensitivity analysis
    Diagnose(DiagnoseArgs),
    /// Write a synthetic dataset and noisy predictions
    Synth(SynthArgs),
    /// Run NMS + evaluation across a list of Gaussian sigmas
    Sweep(SweepArgs),
}

#[derive(Args, Default)]
pub struct NmsFlags {
    /// hard, soft_linear or soft_gaussian
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub score_floor: Option<f64>,
    #[arg(long)]
    pub max_kept: Option<usize>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub class_agnostic: Option<bool>,
}

#[derive(Args, Default)]
pub struct EvalFlags {
    /// Comma-separated, strictly increasing
    #[arg(long, value_delimiter = ',')]
    pub tiou_thresholds: Option<Vec<f64>>,
    /// Comma-separated multiples of the ground-truth count
    #[arg(long, value_delimiter = ',')]
    pub recall_k: Option<Vec<u32>>,
    /// micro or macro
    #[arg(long)]
    pub recall_mode: Option<String>,
}

#[derive(Args)]
pub struct NmsArgs {
    /// Prediction file to suppress
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Optional ground truth used to validate video ids and ranges
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub nms: NmsFlags,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Report path (default: stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Args)]
pub struct AssignArgs {
    /// Candidate/ground-truth file
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub center_radius: Option<f64>,
    #[arg(long)]
    pub lambda_iou: Option<f64>,
    #[arg(long)]
    pub top_q: Option<usize>,
    #[arg(long)]
    pub ineligible_cost: Option<f64>,
    /// Treat the center prior as a cost term only
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub soft_mask: Option<bool>,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// tIoU at which two ground truths count as near-replicates
    #[arg(long)]
    pub replicate_threshold: Option<f64>,
    /// Only count near-replicates that share a label
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub per_category: Option<bool>,
    #[arg(long)]
    pub tiou_strong: Option<f64>,
    #[arg(long)]
    pub tiou_weak: Option<f64>,
    #[arg(long)]
    pub depth_multiplier: Option<usize>,
    /// tIoU for the false-negative and sensitivity breakdowns
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Average ground truths per category for normalized mAP
    #[arg(long)]
    pub normalizer: Option<f64>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub num_videos: Option<usize>,
    #[arg(long)]
    pub num_categories: Option<usize>,
    #[arg(long)]
    pub replicate_rate: Option<f64>,
    /// Also write candidates.json for assign-sim
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub candidates: Option<bool>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Comma-separated Gaussian sigmas
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[command(flatten)]
    pub nms: NmsFlags,
    #[command(flatten)]
    pub eval: EvalFlags,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = config::pick(cli.global.threads, file.threads, 0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    commands::dispatch(cli, &file)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
