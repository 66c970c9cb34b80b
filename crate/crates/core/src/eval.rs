//! Detection metrics: per-category AP over tIoU thresholds, average mAP and
//! Recall@kx.
//!
//! Predictions are ranked by score with ties kept in input order (video id
//! order, then position in the video's list). A prediction matches the
//! unmatched ground truth of its category with the highest tIoU at or above
//! the threshold; equal tIoU prefers the earlier-starting ground truth.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroundTruth, PredictionSet};
use crate::error::{Error, Result};
use crate::segment::{tiou, ScoredSegment, Segment};

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_RECALL_KS: [u32; 3] = [1, 2, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    /// Matched ground truths over all ground truths.
    #[default]
    Micro,
    /// Mean of per-category recall.
    Macro,
}

impl std::str::FromStr for RecallMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            _ => Err(Error::Config(format!("unknown recall mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub recall_ks: Vec<u32>,
    pub recall_mode: RecallMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            recall_ks: DEFAULT_RECALL_KS.to_vec(),
            recall_mode: RecallMode::Micro,
        }
    }
}

pub(crate) fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config("at least one tIoU threshold is required".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Config(format!("tIoU threshold {t} outside (0, 1]")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("tIoU thresholds must be strictly increasing".into()));
    }
    Ok(())
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        check_thresholds(&self.thresholds)?;
        if self.recall_ks.contains(&0) {
            return Err(Error::Config("recall k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub k: u32,
    /// Aligned with [`EvalReport::thresholds`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Per category, aligned with `thresholds`.
    pub ap: BTreeMap<String, Vec<f64>>,
    pub map_at: Vec<f64>,
    pub average_map: f64,
    pub recall_mode: RecallMode,
    pub recall: Vec<RecallRow>,
}

impl EvalReport {
    fn threshold_index(&self, threshold: f64) -> Option<usize> {
        self.thresholds.iter().position(|t| (t - threshold).abs() < 1e-12)
    }

    pub fn ap(&self, category: &str, threshold: f64) -> Option<f64> {
        Some(self.ap.get(category)?[self.threshold_index(threshold)?])
    }

    pub fn map_at(&self, threshold: f64) -> Option<f64> {
        Some(self.map_at[self.threshold_index(threshold)?])
    }

    pub fn recall_at(&self, k: u32, threshold: f64) -> Option<f64> {
        let t = self.threshold_index(threshold)?;
        self.recall.iter().find(|r| r.k == k).map(|r| r.values[t])
    }
}

/// Stable score-descending order of indices.
fn rank(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy one-to-one matching. `ious[p][g]` is the tIoU of the p-th ranked
/// prediction with ground truth g; `gt_starts` breaks tIoU ties.
fn greedy_match(ious: &[Vec<f64>], gt_starts: &[f64], threshold: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; gt_starts.len()];
    ious.iter()
        .map(|row| {
            let mut best: Option<usize> = None;
            for (g, &iou) in row.iter().enumerate() {
                if taken[g] || iou < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => iou > row[b] || (iou == row[b] && gt_starts[g] < gt_starts[b]),
                };
                if better {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                taken[g] = true;
            }
            best
        })
        .collect()
}

/// One ranked prediction and the ground truth it matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedMatch {
    pub prediction: usize,
    pub gt: Option<usize>,
}

impl RankedMatch {
    pub fn is_tp(&self) -> bool {
        self.gt.is_some()
    }
}

/// Match predictions to same-category ground truths at `threshold`.
/// The result is in rank order.
pub fn match_predictions(preds: &[ScoredSegment], gts: &[GroundTruth], threshold: f64) -> Vec<RankedMatch> {
    let order = rank(preds.iter().map(|p| p.score));
    let gt_starts: Vec<f64> = gts.iter().map(|g| g.segment.start()).collect();
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&p| {
            gts.iter()
                .map(|g| if g.label == preds[p].label { tiou(&preds[p].segment, &g.segment) } else { -1.0 })
                .collect()
        })
        .collect();
    greedy_match(&ious, &gt_starts, threshold)
        .into_iter()
        .zip(order)
        .map(|(gt, prediction)| RankedMatch { prediction, gt })
        .collect()
}

/// All-point interpolated AP with an optional DETAD normalizer.
///
/// With `normalizer = Some(n)` precision at each rank is `R*n / (R*n + FP)`
/// (the detection count is rescaled to an average category size `n`).
pub fn interpolated_ap(flags: &[bool], num_gt: usize, normalizer: Option<f64>) -> f64 {
    if num_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    for &f in flags {
        if f {
            tp += 1;
        } else {
            fp += 1;
        }
        let r = tp as f64 / num_gt as f64;
        let p = match normalizer {
            None => tp as f64 / (tp + fp) as f64,
            Some(n) => {
                let rn = r * n;
                if rn + fp as f64 > 0.0 {
                    rn / (rn + fp as f64)
                } else {
                    0.0
                }
            }
        };
        precision.push(p);
        recall.push(r);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..flags.len() {
        if flags[i] {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    ap
}

pub fn average_precision(flags: &[bool], num_gt: usize) -> f64 {
    interpolated_ap(flags, num_gt, None)
}

/// Ground truths and ranked predictions of one category in one video.
struct Block {
    video: usize,
    gt_starts: Vec<f64>,
    /// (input index, score) in rank order.
    preds: Vec<(usize, f64)>,
    ious: Vec<Vec<f64>>,
}

/// Per-category blocks, categories in sorted order.
struct Table {
    categories: Vec<String>,
    blocks: Vec<Vec<Block>>,
    num_gt: Vec<usize>,
}

fn build_table(dataset: &Dataset, preds: &PredictionSet) -> Result<Table> {
    if let Some((id, _)) = preds.iter().find(|(id, _)| dataset.get(id).is_none()) {
        return Err(Error::Video { video_id: id.clone(), reason: "not present in the ground truth".into() });
    }
    let categories = dataset.categories();
    let cat_index: BTreeMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let videos: Vec<(usize, &String, &crate::dataset::Video)> =
        dataset.iter().enumerate().map(|(i, (id, v))| (i, id, v)).collect();
    let per_video: Vec<Vec<(usize, Block)>> = videos
        .par_iter()
        .map(|&(vi, id, video)| {
            let mut gts: BTreeMap<usize, Vec<Segment>> = BTreeMap::new();
            for g in &video.ground_truths {
                gts.entry(cat_index[g.label.as_str()]).or_default().push(g.segment);
            }
            let mut by_cat: BTreeMap<usize, Vec<(usize, &ScoredSegment)>> = BTreeMap::new();
            for (i, p) in preds.get(id).iter().enumerate() {
                if let Some(&c) = cat_index.get(p.label.as_str()) {
                    by_cat.entry(c).or_default().push((i, p));
                }
            }
            let mut cats: Vec<usize> = gts.keys().chain(by_cat.keys()).copied().collect();
            cats.sort_unstable();
            cats.dedup();
            cats.into_iter()
                .map(|c| {
                    let g = gts.remove(&c).unwrap_or_default();
                    let p = by_cat.remove(&c).unwrap_or_default();
                    let order = rank(p.iter().map(|(_, s)| s.score));
                    let ranked: Vec<(usize, &ScoredSegment)> = order.iter().map(|&o| p[o]).collect();
                    let ious = ranked.iter().map(|(_, s)| g.iter().map(|gs| tiou(&s.segment, gs)).collect()).collect();
                    let block = Block {
                        video: vi,
                        gt_starts: g.iter().map(Segment::start).collect(),
                        preds: ranked.iter().map(|(i, s)| (*i, s.score)).collect(),
                        ious,
                    };
                    (c, block)
                })
                .collect()
        })
        .collect();

    let mut blocks: Vec<Vec<Block>> = (0..categories.len()).map(|_| Vec::new()).collect();
    let mut num_gt = vec![0; categories.len()];
    for v in per_video {
        for (c, b) in v {
            num_gt[c] += b.gt_starts.len();
            blocks[c].push(b);
        }
    }
    Ok(Table { categories, blocks, num_gt })
}

fn category_ap(blocks: &[Block], num_gt: usize, threshold: f64, normalizer: Option<f64>) -> f64 {
    // (score, video, input index, tp)
    let mut pooled: Vec<(f64, usize, usize, bool)> = Vec::new();
    for b in blocks {
        let m = greedy_match(&b.ious, &b.gt_starts, threshold);
        pooled.extend(b.preds.iter().zip(m).map(|(&(i, s), g)| (s, b.video, i, g.is_some())));
    }
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let flags: Vec<bool> = pooled.iter().map(|x| x.3).collect();
    interpolated_ap(&flags, num_gt, normalizer)
}

/// AP per ground-truth category at each threshold, optionally normalized.
pub fn ap_per_category(
    dataset: &Dataset,
    preds: &PredictionSet,
    thresholds: &[f64],
    normalizer: Option<f64>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    check_thresholds(thresholds)?;
    let table = build_table(dataset, preds)?;
    Ok(ap_from_table(&table, thresholds, normalizer))
}

fn ap_from_table(table: &Table, thresholds: &[f64], normalizer: Option<f64>) -> BTreeMap<String, Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..table.categories.len())
        .into_par_iter()
        .map(|c| thresholds.iter().map(|&t| category_ap(&table.blocks[c], table.num_gt[c], t, normalizer)).collect())
        .collect();
    table.categories.iter().cloned().zip(rows).collect()
}

/// Mean over categories for each threshold; 0 when there are no categories.
pub fn mean_ap(ap: &BTreeMap<String, Vec<f64>>, num_thresholds: usize) -> Vec<f64> {
    (0..num_thresholds)
        .map(|t| if ap.is_empty() { 0.0 } else { ap.values().map(|v| v[t]).sum::<f64>() / ap.len() as f64 })
        .collect()
}

fn recall_from_table(table: &Table, k: u32, threshold: f64, mode: RecallMode) -> f64 {
    let per_cat: Vec<(usize, usize)> = table
        .blocks
        .iter()
        .map(|blocks| {
            let mut matched = 0;
            let mut total = 0;
            for b in blocks {
                let m = b.gt_starts.len();
                if m == 0 {
                    continue;
                }
                total += m;
                // Greedy matching is prefix-stable: matching the top N alone
                // gives the same outcome as the first N of the full run.
                let keep = (k as usize * m).min(b.preds.len());
                matched += greedy_match(&b.ious[..keep], &b.gt_starts, threshold).iter().flatten().count();
            }
            (matched, total)
        })
        .collect();
    match mode {
        RecallMode::Micro => {
            let total: usize = per_cat.iter().map(|x| x.1).sum();
            if total == 0 {
                0.0
            } else {
                per_cat.iter().map(|x| x.0).sum::<usize>() as f64 / total as f64
            }
        }
        RecallMode::Macro => {
            let cats: Vec<f64> = per_cat.iter().filter(|x| x.1 > 0).map(|&(m, t)| m as f64 / t as f64).collect();
            if cats.is_empty() {
                0.0
            } else {
                cats.iter().sum::<f64>() / cats.len() as f64
            }
        }
    }
}

/// Full evaluation: AP per category and threshold, mAP, average mAP and
/// Recall@kx. Predictions whose label never occurs in the ground truth
/// are ignored.
pub fn evaluate(dataset: &Dataset, preds: &PredictionSet, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let table = build_table(dataset, preds)?;
    let ap = ap_from_table(&table, &config.thresholds, None);
    let map_at = mean_ap(&ap, config.thresholds.len());
    let average_map = map_at.iter().sum::<f64>() / map_at.len() as f64;
    let recall = config
        .recall_ks
        .iter()
        .map(|&k| RecallRow {
            k,
            values: config.thresholds.iter().map(|&t| recall_from_table(&table, k, t, config.recall_mode)).collect(),
        })
        .collect();
    Ok(EvalReport {
        thresholds: config.thresholds.clone(),
        ap,
        map_at,
        average_map,
        recall_mode: config.recall_mode,
        recall,
    })
}

/// Per-video match of every prediction at `threshold`, indexed like the
/// input lists: `result[video][i]` is the matched ground-truth index into
/// that video's annotation list.
pub fn match_dataset(
    dataset: &Dataset,
    preds: &PredictionSet,
    threshold: f64,
) -> Result<BTreeMap<String, Vec<Option<usize>>>> {
    if let Some((id, _)) = preds.iter().find(|(id, _)| dataset.get(id).is_none()) {
        return Err(Error::Video { video_id: id.clone(), reason: "not present in the ground truth".into() });
    }
    Ok(dataset
        .iter()
        .map(|(id, v)| {
            let p = preds.get(id);
            let mut out = vec![None; p.len()];
            for m in match_predictions(p, &v.ground_truths, threshold) {
                out[m.prediction] = m.gt;
            }
            (id.clone(), out)
        })
        .collect())
}
