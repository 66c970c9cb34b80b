//! Flat TOML config file. Every flag has a key of the same name with
//! dashes replaced by underscores; flags given on the command line win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,

    pub input: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,

    pub method: Option<String>,
    pub sigma: Option<f64>,
    pub iou_threshold: Option<f64>,
    pub score_floor: Option<f64>,
    pub max_kept: Option<usize>,
    pub class_agnostic: Option<bool>,
    pub sigmas: Option<Vec<f64>>,

    pub tiou_thresholds: Option<Vec<f64>>,
    pub recall_k: Option<Vec<u32>>,
    pub recall_mode: Option<String>,

    pub center_radius: Option<f64>,
    pub lambda_iou: Option<f64>,
    pub top_q: Option<usize>,
    pub ineligible_cost: Option<f64>,
    pub soft_mask: Option<bool>,

    pub replicate_threshold: Option<f64>,
    pub per_category: Option<bool>,
    pub tiou_strong: Option<f64>,
    pub tiou_weak: Option<f64>,
    pub depth_multiplier: Option<usize>,
    pub threshold: Option<f64>,
    pub normalizer: Option<f64>,

    pub num_videos: Option<usize>,
    pub num_categories: Option<usize>,
    pub moments_min: Option<usize>,
    pub moments_max: Option<usize>,
    pub duration_min: Option<f64>,
    pub duration_max: Option<f64>,
    pub length_min: Option<f64>,
    pub length_max: Option<f64>,
    pub replicate_rate: Option<f64>,
    pub replicate_same_label: Option<bool>,
    pub jitter_std: Option<f64>,
    pub duplicate_rate: Option<f64>,
    pub duplicate_trials: Option<usize>,
    pub duplicate_jitter_scale: Option<f64>,
    pub background_rate: Option<f64>,
    pub background_score_max: Option<f64>,
    pub label_flip_rate: Option<f64>,
    pub score_base: Option<f64>,
    pub score_slope: Option<f64>,
    pub score_noise: Option<f64>,
    pub candidates: Option<bool>,
    pub num_instances: Option<usize>,
    pub sequence_length: Option<usize>,
    pub num_levels: Option<u32>,
    pub num_classes: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Flag, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file).ok_or_else(|| CliError::Config(format!("--{} is required", name.replace('_', "-"))))
}
