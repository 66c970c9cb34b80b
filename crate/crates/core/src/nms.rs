//! Greedy non-maximum suppression over scored segments.
//!
//! The Gaussian SoftNMS decay is `exp(-iou^2 / sigma)`; a larger `sigma`
//! flattens it so heavily overlapping (near-replicate) moments keep more of
//! their score.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionSet;
use crate::error::{Error, Result};
use crate::segment::{tiou, ScoredSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMethod {
    Hard,
    SoftLinear,
    SoftGaussian,
}

impl std::str::FromStr for NmsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Self::Hard),
            "soft_linear" | "linear" => Ok(Self::SoftLinear),
            "soft_gaussian" | "gaussian" => Ok(Self::SoftGaussian),
            _ => Err(Error::Config(format!("unknown NMS method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub method: NmsMethod,
    pub sigma: f64,
    pub iou_threshold: f64,
    pub score_floor: f64,
    /// `None` keeps everything.
    pub max_kept: Option<usize>,
    pub class_agnostic: bool,
}

pub const DEFAULT_SIGMA: f64 = 2.0;
pub const BASELINE_SIGMA: f64 = 0.9;

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            method: NmsMethod::SoftGaussian,
            sigma: DEFAULT_SIGMA,
            iou_threshold: 0.5,
            score_floor: 0.001,
            max_kept: Some(2000),
            class_agnostic: false,
        }
    }
}

impl NmsConfig {
    /// The prior setting with the peakier `sigma = 0.9`.
    pub fn baseline() -> Self {
        Self { sigma: BASELINE_SIGMA, ..Self::default() }
    }

    pub fn hard(iou_threshold: f64) -> Self {
        Self { method: NmsMethod::Hard, iou_threshold, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::Config(format!("iou_threshold {} outside [0, 1]", self.iou_threshold)));
        }
        if !(0.0..=1.0).contains(&self.score_floor) {
            return Err(Error::Config(format!("score_floor {} outside [0, 1]", self.score_floor)));
        }
        if self.max_kept == Some(0) {
            return Err(Error::Config("max_kept must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian decay factor `exp(-iou^2 / sigma)`.
pub fn gaussian_penalty(iou: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    Ok((-(iou * iou) / sigma).exp())
}

/// Priority used both for popping and for the final output order:
/// higher score, then earlier start, shorter duration, label, input index.
fn priority(a: &ScoredSegment, ia: usize, sa: f64, b: &ScoredSegment, ib: usize, sb: f64) -> Ordering {
    sb.total_cmp(&sa)
        .then(a.segment.start().total_cmp(&b.segment.start()))
        .then(a.segment.duration().total_cmp(&b.segment.duration()))
        .then_with(|| a.label.cmp(&b.label))
        .then(ia.cmp(&ib))
}

/// Live-set key: descending non-negative score (its bit pattern is
/// order-preserving), then the static tie rank.
fn live_key(score: f64, rank: u32) -> (u64, u32) {
    (u64::MAX - score.to_bits(), rank)
}

/// Suppress one group, returning `(index, final score)` in pop order.
fn suppress_group(cands: &[ScoredSegment], members: &[usize], config: &NmsConfig) -> Vec<(usize, f64)> {
    let limit = config.max_kept.unwrap_or(usize::MAX);

    // Members sorted by start for overlap lookup; any overlapping segment
    // starts within (s - max_duration, e).
    let mut by_start: Vec<usize> = members.to_vec();
    by_start.sort_by(|&a, &b| cands[a].segment.start().total_cmp(&cands[b].segment.start()).then(a.cmp(&b)));
    let starts: Vec<f64> = by_start.iter().map(|&i| cands[i].segment.start()).collect();
    let max_duration = members.iter().map(|&i| cands[i].segment.duration()).fold(0.0, f64::max);

    // Ties on score fall back to the rest of `priority`, which does not
    // depend on the score and can be ranked once.
    let mut tie_order: Vec<usize> = members.to_vec();
    tie_order.sort_by(|&a, &b| priority(&cands[a], a, 0.0, &cands[b], b, 0.0));
    let mut rank = vec![0u32; cands.len()];
    for (r, &i) in tie_order.iter().enumerate() {
        rank[i] = r as u32;
    }

    let mut score: Vec<f64> = cands.iter().map(|c| c.score).collect();
    let mut alive = vec![false; cands.len()];
    let mut live = BTreeSet::new();
    for &i in members {
        if cands[i].score >= config.score_floor {
            alive[i] = true;
            live.insert(live_key(score[i], rank[i]));
        }
    }
    let mut by_rank = vec![0usize; tie_order.len()];
    for (r, &i) in tie_order.iter().enumerate() {
        by_rank[r] = i;
    }

    let mut kept = Vec::new();
    while kept.len() < limit {
        let Some((_, r)) = live.pop_first() else { break };
        let p = by_rank[r as usize];
        alive[p] = false;
        kept.push((p, score[p]));

        let seg = &cands[p].segment;
        if seg.duration() <= 0.0 {
            continue;
        }
        let lo = starts.partition_point(|&s| s <= seg.start() - max_duration);
        let hi = starts.partition_point(|&s| s < seg.end());
        for &q in &by_start[lo..hi] {
            if !alive[q] {
                continue;
            }
            let iou = tiou(seg, &cands[q].segment);
            if iou <= 0.0 {
                continue;
            }
            let factor = match config.method {
                NmsMethod::Hard => {
                    if iou > config.iou_threshold {
                        0.0
                    } else {
                        1.0
                    }
                }
                NmsMethod::SoftLinear => {
                    if iou > config.iou_threshold {
                        1.0 - iou
                    } else {
                        1.0
                    }
                }
                NmsMethod::SoftGaussian => (-(iou * iou) / config.sigma).exp(),
            };
            if factor == 1.0 {
                continue;
            }
            live.remove(&live_key(score[q], rank[q]));
            score[q] *= factor;
            let suppressed = matches!(config.method, NmsMethod::Hard) && factor == 0.0;
            if suppressed || score[q] < config.score_floor {
                alive[q] = false;
            } else {
                live.insert(live_key(score[q], rank[q]));
            }
        }
    }
    kept
}

/// Greedy hard NMS or SoftNMS.
///
/// When `class_agnostic` is false each label is suppressed independently.
/// Rescoring is cumulative: a survivor is decayed once for every earlier
/// pick it overlaps. The output is ordered by final score and truncated to
/// `max_kept`; every output score is at most its input score.
pub fn suppress(candidates: &[ScoredSegment], config: &NmsConfig) -> Result<Vec<ScoredSegment>> {
    config.validate()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        let key = if config.class_agnostic { "" } else { c.label.as_str() };
        groups.entry(key).or_default().push(i);
    }

    let mut kept: Vec<(usize, f64)> =
        groups.values().flat_map(|members| suppress_group(candidates, members, config)).collect();
    kept.sort_by(|&(a, sa), &(b, sb)| priority(&candidates[a], a, sa, &candidates[b], b, sb));
    if let Some(limit) = config.max_kept {
        kept.truncate(limit);
    }
    Ok(kept
        .into_iter()
        .map(|(i, s)| ScoredSegment { segment: candidates[i].segment, label: candidates[i].label.clone(), score: s })
        .collect())
}

/// [`suppress`] applied to every video independently.
pub fn suppress_all(preds: &PredictionSet, config: &NmsConfig) -> Result<PredictionSet> {
    config.validate()?;
    let videos: Vec<(&String, &Vec<ScoredSegment>)> = preds.iter().collect();
    let out: Vec<(String, Vec<ScoredSegment>)> =
        videos.par_iter().map(|(id, p)| suppress(p, config).map(|s| ((*id).clone(), s))).collect::<Result<_>>()?;
    Ok(PredictionSet::from_map(out.into_iter().collect()))
}
