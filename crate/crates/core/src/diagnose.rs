//! Dataset and error analysis: near-replicate statistics, DETAD-style
//! false-positive categories, false-negative rates and normalized-mAP
//! sensitivity per moment characteristic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PredictionSet};
use crate::error::{Error, Result};
use crate::eval::{ap_per_category, match_dataset, mean_ap};
use crate::segment::tiou;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatePair {
    pub video_id: String,
    pub first: usize,
    pub second: usize,
    pub tiou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub threshold: f64,
    /// Flagged ground-truth indices per video, ascending.
    pub flagged: BTreeMap<String, Vec<usize>>,
    pub pairs: Vec<ReplicatePair>,
    pub total: usize,
    pub flagged_count: usize,
    /// Flagged ground truths over all ground truths.
    pub fraction: f64,
    /// Pairs over all ground truths (counts one per pair).
    pub pair_fraction: f64,
}

/// Flag every ground truth whose tIoU with another ground truth of the same
/// video reaches `overlap_threshold`.
pub fn near_replicates(dataset: &Dataset, overlap_threshold: f64, per_category: bool) -> Result<ReplicateReport> {
    if !(overlap_threshold > 0.0 && overlap_threshold <= 1.0) {
        return Err(Error::Config(format!("overlap threshold {overlap_threshold} outside (0, 1]")));
    }
    let mut flagged = BTreeMap::new();
    let mut pairs = Vec::new();
    for (id, video) in dataset.iter() {
        let gts = &video.ground_truths;
        let mut hit = vec![false; gts.len()];
        for a in 0..gts.len() {
            for b in a + 1..gts.len() {
                if per_category && gts[a].label != gts[b].label {
                    continue;
                }
                let t = tiou(&gts[a].segment, &gts[b].segment);
                if t >= overlap_threshold {
                    hit[a] = true;
                    hit[b] = true;
                    pairs.push(ReplicatePair { video_id: id.clone(), first: a, second: b, tiou: t });
                }
            }
        }
        let idx: Vec<usize> = hit.iter().enumerate().filter(|(_, h)| **h).map(|(i, _)| i).collect();
        if !idx.is_empty() {
            flagged.insert(id.clone(), idx);
        }
    }
    let total = dataset.num_ground_truths();
    let flagged_count = flagged.values().map(Vec::len).sum();
    let ratio = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(ReplicateReport {
        threshold: overlap_threshold,
        fraction: ratio(flagged_count),
        pair_fraction: ratio(pairs.len()),
        flagged,
        pairs,
        total,
        flagged_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpType {
    TruePositive,
    DoubleDetection,
    WrongLabel,
    LocalizationError,
    ConfusionError,
    BackgroundError,
}

impl FpType {
    pub const ERRORS: [FpType; 5] = [
        FpType::DoubleDetection,
        FpType::WrongLabel,
        FpType::LocalizationError,
        FpType::ConfusionError,
        FpType::BackgroundError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FpType::TruePositive => "true_positive",
            FpType::DoubleDetection => "double_detection",
            FpType::WrongLabel => "wrong_label",
            FpType::LocalizationError => "localization_error",
            FpType::ConfusionError => "confusion_error",
            FpType::BackgroundError => "background_error",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpCounts {
    pub true_positive: usize,
    pub double_detection: usize,
    pub wrong_label: usize,
    pub localization_error: usize,
    pub confusion_error: usize,
    pub background_error: usize,
}

impl FpCounts {
    fn bump(&mut self, t: FpType) {
        *match t {
            FpType::TruePositive => &mut self.true_positive,
            FpType::DoubleDetection => &mut self.double_detection,
            FpType::WrongLabel => &mut self.wrong_label,
            FpType::LocalizationError => &mut self.localization_error,
            FpType::ConfusionError => &mut self.confusion_error,
            FpType::BackgroundError => &mut self.background_error,
        } += 1;
    }

    pub fn total(&self) -> usize {
        self.true_positive
            + self.double_detection
            + self.wrong_label
            + self.localization_error
            + self.confusion_error
            + self.background_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpConfig {
    pub tiou_strong: f64,
    pub tiou_weak: f64,
    /// Analyze the top `depth_multiplier * G` predictions, G = ground truths.
    pub depth_multiplier: usize,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self { tiou_strong: 0.5, tiou_weak: 0.1, depth_multiplier: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpProfile {
    pub depth: usize,
    pub analyzed: usize,
    pub counts: FpCounts,
    /// Counts keyed by the prediction's label.
    pub per_label: BTreeMap<String, FpCounts>,
    /// mAP at `tiou_strong` on the analyzed predictions.
    pub baseline_map: f64,
    /// mAP change when all predictions of an error type are removed.
    pub impact: BTreeMap<String, f64>,
    /// Per video, the type of each prediction; `None` beyond the depth.
    #[serde(skip)]
    pub types: BTreeMap<String, Vec<Option<FpType>>>,
}

/// Label the top-scored predictions with the first matching DETAD rule:
/// true positive, double detection, wrong label, localization, confusion,
/// background.
pub fn classify_false_positives(dataset: &Dataset, preds: &PredictionSet, config: &FpConfig) -> Result<FpProfile> {
    let FpConfig { tiou_strong: strong, tiou_weak: weak, depth_multiplier } = *config;
    if !(0.0 < weak && weak < strong && strong <= 1.0) {
        return Err(Error::Config(format!("need 0 < tiou_weak ({weak}) < tiou_strong ({strong}) <= 1")));
    }
    if let Some((id, _)) = preds.iter().find(|(id, _)| dataset.get(id).is_none()) {
        return Err(Error::Video { video_id: id.clone(), reason: "not present in the ground truth".into() });
    }

    // (score, video order, index)
    let mut ranked: Vec<(f64, usize, usize, &String)> = Vec::new();
    for (vi, (id, _)) in dataset.iter().enumerate() {
        ranked.extend(preds.get(id).iter().enumerate().map(|(i, p)| (p.score, vi, i, id)));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let depth = depth_multiplier.saturating_mul(dataset.num_ground_truths());
    ranked.truncate(depth);

    let mut types: BTreeMap<String, Vec<Option<FpType>>> =
        dataset.iter().map(|(id, _)| (id.clone(), vec![None; preds.get(id).len()])).collect();
    let mut matched: BTreeMap<&String, Vec<bool>> =
        dataset.iter().map(|(id, v)| (id, vec![false; v.ground_truths.len()])).collect();
    let mut counts = FpCounts::default();
    let mut per_label: BTreeMap<String, FpCounts> = BTreeMap::new();

    for &(_, _, i, id) in &ranked {
        let p = &preds.get(id)[i];
        let gts = &dataset.get(id).expect("checked above").ground_truths;
        let taken = matched.get_mut(id).expect("every video has a slot");

        let mut best_free: Option<(usize, f64)> = None;
        let mut best_same = 0.0f64;
        let mut best_other = 0.0f64;
        for (g, gt) in gts.iter().enumerate() {
            let t = tiou(&p.segment, &gt.segment);
            if gt.label == p.label {
                best_same = best_same.max(t);
                if t >= strong && !taken[g] && best_free.is_none_or(|(_, bt)| t > bt) {
                    best_free = Some((g, t));
                }
            } else {
                best_other = best_other.max(t);
            }
        }
        let kind = if let Some((g, _)) = best_free {
            taken[g] = true;
            FpType::TruePositive
        } else if best_same >= strong {
            FpType::DoubleDetection
        } else if best_other >= strong {
            FpType::WrongLabel
        } else if best_same >= weak {
            FpType::LocalizationError
        } else if best_other >= weak {
            FpType::ConfusionError
        } else {
            FpType::BackgroundError
        };
        counts.bump(kind);
        per_label.entry(p.label.clone()).or_default().bump(kind);
        types.get_mut(id).expect("every video has a slot")[i] = Some(kind);
    }

    let keep = |allow: &dyn Fn(FpType) -> bool| {
        preds.map_videos(|id, p| {
            p.iter().zip(&types[id]).filter(|(_, t)| t.is_some_and(allow)).map(|(x, _)| x.clone()).collect()
        })
    };
    let map_of = |set: &PredictionSet| -> Result<f64> {
        let ap = ap_per_category(dataset, set, &[strong], None)?;
        Ok(mean_ap(&ap, 1)[0])
    };
    let baseline_map = map_of(&keep(&|_| true))?;
    let mut impact = BTreeMap::new();
    for t in FpType::ERRORS {
        let without = map_of(&keep(&|x| x != t))?;
        impact.insert(t.name().to_string(), without - baseline_map);
    }

    Ok(FpProfile { depth, analyzed: ranked.len(), counts, per_label, baseline_map, impact, types })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    /// Moment length in seconds.
    Length,
    /// Moment length over video duration.
    Coverage,
    /// Number of ground truths in the moment's video.
    InstanceCount,
}

impl Characteristic {
    pub const ALL: [Characteristic; 3] =
        [Characteristic::Length, Characteristic::Coverage, Characteristic::InstanceCount];

    /// Quantile quintiles for the continuous characteristics, fixed
    /// 1 / 2-3 / 4-7 / 8-15 / 16+ bins for instance counts.
    pub fn default_binning(self) -> Binning {
        match self {
            Characteristic::Length | Characteristic::Coverage => Binning::Quantiles(5),
            Characteristic::InstanceCount => Binning::Edges(vec![1.0, 2.0, 4.0, 8.0, 16.0, f64::INFINITY]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    Quantiles(usize),
    /// Increasing edges; bin i is `[edges[i], edges[i + 1])`, the last bin
    /// also includes its upper edge.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub gt_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fn_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_map: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicBins {
    pub characteristic: Characteristic,
    pub threshold: f64,
    /// Non-empty bins only.
    pub bins: Vec<Bin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall_normalized_map: Option<f64>,
}

fn bin_labels(n: usize) -> Vec<String> {
    if n == 5 {
        ["XS", "S", "M", "L", "XL"].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("B{i}")).collect()
    }
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `[lo, hi)` range of each bin.
pub type BinRanges = Vec<(f64, f64)>;

/// Bin edges for `values` and the bin index of each value.
pub fn assign_bins(values: &[f64], binning: &Binning) -> Result<(BinRanges, Vec<usize>)> {
    let edges: Vec<f64> = match binning {
        Binning::Quantiles(n) => {
            if *n == 0 {
                return Err(Error::Config("quantile binning needs at least one bin".into()));
            }
            if values.is_empty() {
                return Ok((Vec::new(), Vec::new()));
            }
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            (0..=*n).map(|i| quantile(&sorted, i as f64 / *n as f64)).collect()
        }
        Binning::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config("bin edges must be at least two increasing values".into()));
            }
            e.clone()
        }
    };
    let nbins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[nbins]);
    let mut index = Vec::with_capacity(values.len());
    for &v in values {
        if v < lo || v > hi {
            return Err(Error::Config(format!("value {v} outside bin range [{lo}, {hi}]")));
        }
        // Count interior edges at or below v.
        let b = edges[1..nbins].partition_point(|&e| e <= v);
        index.push(b);
    }
    Ok((edges.windows(2).map(|w| (w[0], w[1])).collect(), index))
}

/// Characteristic value of every ground truth, in dataset order.
fn characteristic_values(dataset: &Dataset, c: Characteristic) -> Vec<f64> {
    dataset
        .iter()
        .flat_map(|(_, v)| {
            let n = v.ground_truths.len() as f64;
            v.ground_truths.iter().map(move |g| match c {
                Characteristic::Length => g.segment.duration(),
                Characteristic::Coverage => g.segment.duration() / v.duration,
                Characteristic::InstanceCount => n,
            })
        })
        .collect()
}

/// Bin index of each ground truth, keyed by `(video, gt index)`.
type BinIndex = BTreeMap<(String, usize), usize>;

fn binned(dataset: &Dataset, c: Characteristic, binning: &Binning) -> Result<(BinRanges, BinIndex)> {
    let values = characteristic_values(dataset, c);
    let (bins, index) = assign_bins(&values, binning)?;
    let keys = dataset.iter().flat_map(|(id, v)| (0..v.ground_truths.len()).map(move |i| (id.clone(), i)));
    Ok((bins, keys.zip(index).collect()))
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Config(format!("tIoU threshold {t} outside (0, 1]")));
    }
    Ok(())
}

/// Fraction of ground truths left unmatched at `threshold`, per bin.
pub fn fn_breakdown(
    dataset: &Dataset,
    preds: &PredictionSet,
    characteristic: Characteristic,
    binning: &Binning,
    threshold: f64,
) -> Result<CharacteristicBins> {
    check_threshold(threshold)?;
    let (edges, bin_of) = binned(dataset, characteristic, binning)?;
    let matches = match_dataset(dataset, preds, threshold)?;
    let mut hit: BTreeMap<(String, usize), bool> = bin_of.keys().map(|k| (k.clone(), false)).collect();
    for (id, m) in &matches {
        for g in m.iter().flatten() {
            hit.insert((id.clone(), *g), true);
        }
    }
    let mut total = vec![0usize; edges.len()];
    let mut missed = vec![0usize; edges.len()];
    for (key, &b) in &bin_of {
        total[b] += 1;
        if !hit[key] {
            missed[b] += 1;
        }
    }
    let labels = bin_labels(edges.len());
    let bins = (0..edges.len())
        .filter(|&b| total[b] > 0)
        .map(|b| Bin {
            label: labels[b].clone(),
            lo: edges[b].0,
            hi: edges[b].1,
            gt_count: total[b],
            fn_rate: Some(missed[b] as f64 / total[b] as f64),
            normalized_map: None,
            relative_change: None,
        })
        .collect();
    Ok(CharacteristicBins { characteristic, threshold, bins, overall_normalized_map: None })
}

/// Observed mean number of ground truths per category.
pub fn default_normalizer(dataset: &Dataset) -> f64 {
    let cats = dataset.categories().len();
    if cats == 0 {
        0.0
    } else {
        dataset.num_ground_truths() as f64 / cats as f64
    }
}

/// Normalized mAP per bin: ground truth restricted to the bin, predictions
/// that matched an out-of-bin ground truth removed, precision normalized
/// to `normalizer` (default: mean ground truths per category).
pub fn sensitivity(
    dataset: &Dataset,
    preds: &PredictionSet,
    characteristic: Characteristic,
    binning: &Binning,
    threshold: f64,
    normalizer: Option<f64>,
) -> Result<CharacteristicBins> {
    check_threshold(threshold)?;
    let n = normalizer.unwrap_or_else(|| default_normalizer(dataset));
    if !(n > 0.0) {
        return Err(Error::Config(format!("normalizer must be positive, got {n}")));
    }
    let (edges, bin_of) = binned(dataset, characteristic, binning)?;
    let matches = match_dataset(dataset, preds, threshold)?;

    let normalized_map = |d: &Dataset, p: &PredictionSet| -> Result<f64> {
        let ap = ap_per_category(d, p, &[threshold], Some(n))?;
        Ok(mean_ap(&ap, 1)[0])
    };
    let overall = normalized_map(dataset, preds)?;

    let labels = bin_labels(edges.len());
    let mut bins = Vec::new();
    for b in 0..edges.len() {
        let restricted = dataset.filter_ground_truths(|id, i, _| bin_of[&(id.to_string(), i)] == b);
        let count = restricted.num_ground_truths();
        if count == 0 {
            continue;
        }
        let kept = preds.map_videos(|id, p| {
            p.iter()
                .zip(&matches[id])
                .filter(|(_, m)| m.is_none_or(|g| bin_of[&(id.to_string(), g)] == b))
                .map(|(x, _)| x.clone())
                .collect()
        });
        let value = normalized_map(&restricted, &kept)?;
        bins.push(Bin {
            label: labels[b].clone(),
            lo: edges[b].0,
            hi: edges[b].1,
            gt_count: count,
            fn_rate: None,
            normalized_map: Some(value),
            relative_change: (overall > 0.0).then(|| (value - overall) / overall),
        });
    }
    Ok(CharacteristicBins { characteristic, threshold, bins, overall_normalized_map: Some(overall) })
}
