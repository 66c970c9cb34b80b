use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use momentq::assign::{center_sampling, simota_assign, AssignConfig, AssignmentResult};
use momentq::diagnose::{
    classify_false_positives, fn_breakdown, near_replicates, sensitivity, Characteristic, CharacteristicBins, FpConfig,
    FpProfile, ReplicateReport,
};
use momentq::eval::{evaluate, EvalConfig, RecallMode, DEFAULT_RECALL_KS, DEFAULT_THRESHOLDS};
use momentq::formats::{self, AssignInstance};
use momentq::nms::{suppress_all, NmsConfig, NmsMethod};
use momentq::pipeline::{sigma_sweep, SWEEP_SIGMAS};
use momentq::synth::{self, CandidateSynthConfig, SynthConfig};
use momentq::{Dataset, PredictionSet};

use crate::config::{pick, require, FileConfig};
use crate::error::{CliError, Result};
use crate::output::Outputs;
use crate::{AssignArgs, Cli, Command, DiagnoseArgs, EvalArgs, EvalFlags, NmsArgs, NmsFlags, SweepArgs, SynthArgs};

pub fn dispatch(cli: Cli, file: &FileConfig) -> Result<()> {
    let strict = pick(cli.global.strict, file.strict, false);
    let seed = pick(cli.global.seed, file.seed, 0);
    match cli.command {
        Command::Nms(a) => nms(a, file, strict),
        Command::Eval(a) => eval(a, file, strict),
        Command::AssignSim(a) => assign_sim(a, file),
        Command::Diagnose(a) => diagnose(a, file, strict),
        Command::Synth(a) => synth_cmd(a, file, seed),
        Command::Sweep(a) => sweep(a, file, strict),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: momentq::Result<T>) -> Result<T> {
    r.map_err(|e| {
        let code = CliError::from(e);
        match code {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        }
    })
}

fn load_dataset(path: &Path, strict: bool) -> Result<Dataset> {
    let text = read(path)?;
    Ok(with_path(path, formats::parse_ground_truth(&text, strict))?.value)
}

fn load_predictions(path: &Path, dataset: Option<&Dataset>, strict: bool) -> Result<PredictionSet> {
    let text = read(path)?;
    Ok(with_path(path, formats::parse_predictions(&text, dataset, strict))?.value)
}

fn nms_config(flags: &NmsFlags, file: &FileConfig) -> Result<NmsConfig> {
    let d = NmsConfig::default();
    let method = match flags.method.as_ref().or(file.method.as_ref()) {
        Some(m) => m.parse::<NmsMethod>()?,
        None => d.method,
    };
    let cfg = NmsConfig {
        method,
        sigma: pick(flags.sigma, file.sigma, d.sigma),
        iou_threshold: pick(flags.iou_threshold, file.iou_threshold, d.iou_threshold),
        score_floor: pick(flags.score_floor, file.score_floor, d.score_floor),
        max_kept: flags.max_kept.or(file.max_kept).or(d.max_kept),
        class_agnostic: pick(flags.class_agnostic, file.class_agnostic, d.class_agnostic),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn eval_config(flags: &EvalFlags, file: &FileConfig) -> Result<EvalConfig> {
    let recall_mode = match flags.recall_mode.as_ref().or(file.recall_mode.as_ref()) {
        Some(m) => m.parse::<RecallMode>()?,
        None => RecallMode::Micro,
    };
    let cfg = EvalConfig {
        thresholds: pick(flags.tiou_thresholds.clone(), file.tiou_thresholds.clone(), DEFAULT_THRESHOLDS.to_vec()),
        recall_ks: pick(flags.recall_k.clone(), file.recall_k.clone(), DEFAULT_RECALL_KS.to_vec()),
        recall_mode,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&PathBuf>, contents: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut out = Outputs::default();
            out.stage(p, contents)?;
            out.commit()
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn nms(a: NmsArgs, file: &FileConfig, strict: bool) -> Result<()> {
    let input = require(a.input, file.input.clone(), "input")?;
    let output = require(a.output, file.output.clone(), "output")?;
    let cfg = nms_config(&a.nms, file)?;
    let dataset = match a.ground_truth.or(file.ground_truth.clone()) {
        Some(p) => Some(load_dataset(&p, strict)?),
        None => None,
    };
    let preds = load_predictions(&input, dataset.as_ref(), strict)?;
    let kept = suppress_all(&preds, &cfg)?;
    emit(Some(&output), &formats::to_json(&formats::prediction_file(&kept))?)
}

fn eval(a: EvalArgs, file: &FileConfig, strict: bool) -> Result<()> {
    let gt = require(a.ground_truth, file.ground_truth.clone(), "ground_truth")?;
    let pr = require(a.predictions, file.predictions.clone(), "predictions")?;
    let cfg = eval_config(&a.eval, file)?;
    let dataset = load_dataset(&gt, strict)?;
    let preds = load_predictions(&pr, Some(&dataset), strict)?;
    let report = evaluate(&dataset, &preds, &cfg)?;
    emit(a.output.or(file.output.clone()).as_ref(), &formats::report_json(&report)?)
}

#[derive(Serialize)]
struct GtSummary {
    dynamic_k: usize,
    eligible: usize,
    claimed: usize,
    assigned: usize,
}

#[derive(Serialize)]
struct StrategySummary {
    positives: usize,
    uncovered_gts: usize,
    per_gt: Vec<GtSummary>,
    /// `[candidate, gt]` pairs
    assignments: Vec<[usize; 2]>,
}

impl From<&AssignmentResult> for StrategySummary {
    fn from(r: &AssignmentResult) -> Self {
        StrategySummary {
            positives: r.num_positive(),
            uncovered_gts: r.gts.iter().filter(|g| g.candidates.is_empty()).count(),
            per_gt: r
                .gts
                .iter()
                .map(|g| GtSummary {
                    dynamic_k: g.dynamic_k,
                    eligible: g.eligible,
                    claimed: g.claimed,
                    assigned: g.candidates.len(),
                })
                .collect(),
            assignments: r.candidates.iter().enumerate().filter_map(|(i, c)| c.map(|a| [i, a.gt])).collect(),
        }
    }
}

#[derive(Serialize)]
struct InstanceSummary {
    id: String,
    num_candidates: usize,
    num_gts: usize,
    center_sampling: StrategySummary,
    simota: StrategySummary,
}

#[derive(Serialize)]
struct Totals {
    center_sampling_positives: usize,
    simota_positives: usize,
    center_sampling_uncovered: usize,
    simota_uncovered: usize,
    num_gts: usize,
}

#[derive(Serialize)]
struct AssignSettings {
    center_radius: f64,
    lambda_iou: f64,
    top_q: usize,
    ineligible_cost: f64,
    hard_mask: bool,
}

#[derive(Serialize)]
struct AssignReport {
    config: AssignSettings,
    totals: Totals,
    instances: Vec<InstanceSummary>,
}

fn assign_sim(a: AssignArgs, file: &FileConfig) -> Result<()> {
    let input = require(a.input, file.input.clone(), "input")?;
    let d = AssignConfig::default();
    let cfg = AssignConfig {
        center_radius: pick(a.center_radius, file.center_radius, d.center_radius),
        lambda_iou: pick(a.lambda_iou, file.lambda_iou, d.lambda_iou),
        top_q: pick(a.top_q, file.top_q, d.top_q),
        ineligible_cost: pick(a.ineligible_cost, file.ineligible_cost, d.ineligible_cost),
        eps: d.eps,
        hard_mask: !pick(a.soft_mask, file.soft_mask, false),
    };
    cfg.validate()?;
    let text = read(&input)?;
    let (num_classes, instances) = with_path(&input, formats::parse_candidates(&text))?;

    let mut summaries = Vec::with_capacity(instances.len());
    for AssignInstance { id, candidates, ground_truths } in &instances {
        let points: Vec<_> = candidates.iter().map(|c| c.point).collect();
        let cs = center_sampling(&points, ground_truths, cfg.center_radius)?;
        let so = simota_assign(candidates, ground_truths, num_classes, &cfg)
            .map_err(|e| CliError::Input(format!("{}: instance {id:?}: {e}", input.display())))?;
        summaries.push(InstanceSummary {
            id: id.clone(),
            num_candidates: candidates.len(),
            num_gts: ground_truths.len(),
            center_sampling: (&cs).into(),
            simota: (&so).into(),
        });
    }
    let totals = Totals {
        center_sampling_positives: summaries.iter().map(|s| s.center_sampling.positives).sum(),
        simota_positives: summaries.iter().map(|s| s.simota.positives).sum(),
        center_sampling_uncovered: summaries.iter().map(|s| s.center_sampling.uncovered_gts).sum(),
        simota_uncovered: summaries.iter().map(|s| s.simota.uncovered_gts).sum(),
        num_gts: summaries.iter().map(|s| s.num_gts).sum(),
    };
    let settings = AssignSettings {
        center_radius: cfg.center_radius,
        lambda_iou: cfg.lambda_iou,
        top_q: cfg.top_q,
        ineligible_cost: cfg.ineligible_cost,
        hard_mask: cfg.hard_mask,
    };
    let report = AssignReport { config: settings, totals, instances: summaries };
    emit(a.output.or(file.output.clone()).as_ref(), &formats::report_json(&report)?)
}

#[derive(Serialize)]
struct DiagnoseReport {
    replicates: ReplicateReport,
    false_positives: FpProfile,
    false_negatives: Vec<CharacteristicBins>,
    sensitivity: Vec<CharacteristicBins>,
}

fn diagnose(a: DiagnoseArgs, file: &FileConfig, strict: bool) -> Result<()> {
    let gt = require(a.ground_truth, file.ground_truth.clone(), "ground_truth")?;
    let pr = require(a.predictions, file.predictions.clone(), "predictions")?;
    let d = FpConfig::default();
    let fp_cfg = FpConfig {
        tiou_strong: pick(a.tiou_strong, file.tiou_strong, d.tiou_strong),
        tiou_weak: pick(a.tiou_weak, file.tiou_weak, d.tiou_weak),
        depth_multiplier: pick(a.depth_multiplier, file.depth_multiplier, d.depth_multiplier),
    };
    let replicate_threshold = pick(a.replicate_threshold, file.replicate_threshold, 0.9);
    let per_category = pick(a.per_category, file.per_category, false);
    let threshold = pick(a.threshold, file.threshold, 0.5);
    let normalizer = a.normalizer.or(file.normalizer);

    let dataset = load_dataset(&gt, strict)?;
    let preds = load_predictions(&pr, Some(&dataset), strict)?;

    let replicates = near_replicates(&dataset, replicate_threshold, per_category)?;
    let false_positives = classify_false_positives(&dataset, &preds, &fp_cfg)?;
    let mut false_negatives = Vec::new();
    let mut sens = Vec::new();
    for c in Characteristic::ALL {
        let binning = c.default_binning();
        false_negatives.push(fn_breakdown(&dataset, &preds, c, &binning, threshold)?);
        sens.push(sensitivity(&dataset, &preds, c, &binning, threshold, normalizer)?);
    }
    let report = DiagnoseReport { replicates, false_positives, false_negatives, sensitivity: sens };
    emit(a.output.or(file.output.clone()).as_ref(), &formats::report_json(&report)?)
}

fn synth_config(a: &SynthArgs, file: &FileConfig, seed: u64) -> SynthConfig {
    let d = SynthConfig::default();
    SynthConfig {
        num_videos: pick(a.num_videos, file.num_videos, d.num_videos),
        num_categories: pick(a.num_categories, file.num_categories, d.num_categories),
        moments_min: pick(None, file.moments_min, d.moments_min),
        moments_max: pick(None, file.moments_max, d.moments_max),
        duration_min: pick(None, file.duration_min, d.duration_min),
        duration_max: pick(None, file.duration_max, d.duration_max),
        length_min: pick(None, file.length_min, d.length_min),
        length_max: pick(None, file.length_max, d.length_max),
        replicate_rate: pick(a.replicate_rate, file.replicate_rate, d.replicate_rate),
        replicate_same_label: pick(None, file.replicate_same_label, d.replicate_same_label),
        jitter_std: pick(None, file.jitter_std, d.jitter_std),
        duplicate_rate: pick(None, file.duplicate_rate, d.duplicate_rate),
        duplicate_trials: pick(None, file.duplicate_trials, d.duplicate_trials),
        duplicate_jitter_scale: pick(None, file.duplicate_jitter_scale, d.duplicate_jitter_scale),
        background_rate: pick(None, file.background_rate, d.background_rate),
        background_score_max: pick(None, file.background_score_max, d.background_score_max),
        label_flip_rate: pick(None, file.label_flip_rate, d.label_flip_rate),
        score_base: pick(None, file.score_base, d.score_base),
        score_slope: pick(None, file.score_slope, d.score_slope),
        score_noise: pick(None, file.score_noise, d.score_noise),
        seed,
    }
}

#[derive(Serialize)]
struct PlantedReport<'a> {
    seed: u64,
    planted_fraction: f64,
    pairs: &'a [synth::PlantedPair],
}

fn synth_cmd(a: SynthArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let dir = require(a.output_dir.clone(), file.output_dir.clone(), "output_dir")?;
    let cfg = synth_config(&a, file, seed);
    let generated = synth::generate_dataset(&cfg)?;
    let preds = synth::generate_predictions(&generated.dataset, &cfg)?;

    std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Outputs::default();
    out.stage(&dir.join("ground_truth.json"), &formats::to_json(&formats::ground_truth_file(&generated.dataset))?)?;
    out.stage(&dir.join("predictions.json"), &formats::to_json(&formats::prediction_file(&preds))?)?;
    let planted = PlantedReport { seed, planted_fraction: generated.planted_fraction(), pairs: &generated.planted };
    out.stage(&dir.join("replicates.json"), &formats::report_json(&planted)?)?;

    if pick(a.candidates, file.candidates, false) {
        let d = CandidateSynthConfig::default();
        let ccfg = CandidateSynthConfig {
            num_instances: pick(None, file.num_instances, d.num_instances),
            sequence_length: pick(None, file.sequence_length, d.sequence_length),
            num_levels: pick(None, file.num_levels, d.num_levels),
            num_classes: pick(None, file.num_classes, d.num_classes),
            seed,
            ..d
        };
        let inst = synth::generate_candidates(&ccfg)?;
        out.stage(&dir.join("candidates.json"), &formats::to_json(&formats::candidate_file(ccfg.num_classes, &inst))?)?;
    }
    out.commit()
}

#[derive(Serialize)]
struct SweepReport {
    thresholds: Vec<f64>,
    rows: Vec<momentq::pipeline::SweepRow>,
}

fn sweep(a: SweepArgs, file: &FileConfig, strict: bool) -> Result<()> {
    let gt = require(a.ground_truth, file.ground_truth.clone(), "ground_truth")?;
    let pr = require(a.predictions, file.predictions.clone(), "predictions")?;
    let sigmas = pick(a.sigmas, file.sigmas.clone(), SWEEP_SIGMAS.to_vec());
    let mut nms = nms_config(&a.nms, file)?;
    nms.method = NmsMethod::SoftGaussian;
    for &s in &sigmas {
        NmsConfig { sigma: s, ..nms.clone() }.validate()?;
    }
    let eval_cfg = eval_config(&a.eval, file)?;
    let dataset = load_dataset(&gt, strict)?;
    let preds = load_predictions(&pr, Some(&dataset), strict)?;
    let rows = sigma_sweep(&dataset, &preds, &nms, &sigmas, &eval_cfg)?;

    let mut table = String::from("| SoftNMS sigma | average mAP (%) |\n|---:|---:|\n");
    for r in &rows {
        let _ = writeln!(table, "| {:.1} | {:.2} |", r.sigma, 100.0 * r.average_map);
    }
    print!("{table}");
    if let Some(path) = a.output.or(file.output.clone()) {
        let report = SweepReport { thresholds: eval_cfg.thresholds, rows };
        emit(Some(&path), &formats::report_json(&report)?)?;
    }
    Ok(())
}
