//! Seeded synthetic datasets with planted near-replicates, plus a noisy
//! oracle predictor.
//!
//! Randomness comes from ChaCha8 seeded with the configured `u64`; the
//! dataset uses stream 0 and the predictor stream 1, so the two are
//! independent and neither depends on the other's draw count. All emitted
//! times and scores lie on the 1e-6 grid so they survive the 6-decimal file
//! format unchanged.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assign::{CandidatePrediction, GtInstance};
use crate::dataset::{Dataset, GroundTruth, PredictionSet, Video};
use crate::error::{Error, Result};
use crate::formats::AssignInstance;
use crate::pyramid::{generate_pyramid, PyramidConfig};
use crate::round6;
use crate::segment::{tiou, ScoredSegment, Segment};

/// Planted replicates overlap their partner at least this much.
pub const REPLICATE_MIN_TIOU: f64 = 0.92;
/// Unrelated moments are kept below this overlap with each other.
pub const ACCIDENTAL_MAX_TIOU: f64 = 0.85;
const PLACEMENT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub num_categories: usize,
    pub moments_min: usize,
    pub moments_max: usize,
    pub duration_min: f64,
    pub duration_max: f64,
    /// Moment lengths are log-uniform in `[length_min, length_max]` seconds.
    pub length_min: f64,
    pub length_max: f64,
    /// Target fraction of ground truths that are near-replicates.
    pub replicate_rate: f64,
    pub replicate_same_label: bool,

    /// Boundary jitter standard deviation in seconds.
    pub jitter_std: f64,
    /// Probability, per trial, of an extra jittered copy of a ground truth.
    pub duplicate_rate: f64,
    pub duplicate_trials: usize,
    /// Duplicates jitter with `jitter_std * duplicate_jitter_scale`.
    pub duplicate_jitter_scale: f64,
    /// Probability, per ground truth, of one background prediction.
    pub background_rate: f64,
    pub background_score_max: f64,
    pub label_flip_rate: f64,
    /// `score = clamp(score_base - score_slope * (1 - tIoU) + N(0, score_noise))`.
    pub score_base: f64,
    pub score_slope: f64,
    pub score_noise: f64,

    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 100,
            num_categories: 10,
            moments_min: 4,
            moments_max: 16,
            duration_min: 240.0,
            duration_max: 480.0,
            length_min: 1.0,
            length_max: 40.0,
            replicate_rate: 0.15,
            replicate_same_label: true,
            jitter_std: 0.3,
            duplicate_rate: 0.3,
            duplicate_trials: 2,
            duplicate_jitter_scale: 2.0,
            background_rate: 0.8,
            background_score_max: 0.7,
            label_flip_rate: 0.1,
            score_base: 0.9,
            score_slope: 0.4,
            score_noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// A predictor that reproduces the ground truth exactly.
    pub fn noiseless(self) -> Self {
        Self {
            jitter_std: 0.0,
            duplicate_rate: 0.0,
            background_rate: 0.0,
            label_flip_rate: 0.0,
            score_noise: 0.0,
            score_base: 1.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("replicate_rate", self.replicate_rate),
            ("duplicate_rate", self.duplicate_rate),
            ("background_rate", self.background_rate),
            ("label_flip_rate", self.label_flip_rate),
            ("background_score_max", self.background_score_max),
            ("score_base", self.score_base),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} = {r} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("jitter_std", self.jitter_std),
            ("score_noise", self.score_noise),
            ("score_slope", self.score_slope),
            ("duplicate_jitter_scale", self.duplicate_jitter_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if self.num_categories == 0 {
            return Err(Error::Config("num_categories must be positive".into()));
        }
        if self.moments_min > self.moments_max {
            return Err(Error::Config("moments_min exceeds moments_max".into()));
        }
        if !(self.duration_min > 0.0 && self.duration_min <= self.duration_max) {
            return Err(Error::Config("duration range must be positive and ordered".into()));
        }
        if !(self.length_min > 0.0 && self.length_min <= self.length_max) {
            return Err(Error::Config("length range must be positive and ordered".into()));
        }
        if self.length_min > self.duration_min {
            return Err(Error::Config(format!(
                "moments of {} s cannot fit videos of {} s",
                self.length_min, self.duration_min
            )));
        }
        Ok(())
    }
}

/// A planted near-replicate pair: indices into the video's annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub video_id: String,
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub planted: Vec<PlantedPair>,
}

impl SynthDataset {
    /// Fraction of ground truths that belong to a planted pair.
    pub fn planted_fraction(&self) -> f64 {
        let total = self.dataset.num_ground_truths();
        if total == 0 {
            0.0
        } else {
            (2 * self.planted.len()) as f64 / total as f64
        }
    }
}

pub fn category_name(i: usize) -> String {
    format!("action_{i:03}")
}

pub fn video_name(i: usize) -> String {
    format!("video_{i:05}")
}

fn q(x: f64) -> f64 {
    round6(x)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        (rng.random_range(lo.ln()..=hi.ln())).exp()
    }
}

fn far_from_all(candidate: &Segment, placed: &[Segment], except: Option<usize>) -> bool {
    placed.iter().enumerate().all(|(i, s)| Some(i) == except || tiou(candidate, s) < ACCIDENTAL_MAX_TIOU)
}

fn place_moment(rng: &mut ChaCha8Rng, cfg: &SynthConfig, duration: f64, placed: &[Segment]) -> Option<Segment> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let len = log_uniform(rng, cfg.length_min, cfg.length_max.min(duration));
        let start = q(rng.random_range(0.0..=(duration - len)));
        let end = q((start + len).min(duration));
        let Ok(s) = Segment::new(start, end) else { continue };
        if s.duration() > 0.0 && far_from_all(&s, placed, None) {
            return Some(s);
        }
    }
    None
}

fn place_replicate(rng: &mut ChaCha8Rng, base_index: usize, duration: f64, placed: &[Segment]) -> Option<Segment> {
    let base = placed[base_index];
    let len = base.duration();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let ds = rng.random_range(-0.03..=0.03) * len;
        let de = rng.random_range(-0.03..=0.03) * len;
        let start = q((base.start() + ds).max(0.0));
        let end = q((base.end() + de).min(duration));
        let Ok(s) = Segment::new(start, end) else { continue };
        if tiou(&s, &base) >= REPLICATE_MIN_TIOU && far_from_all(&s, placed, Some(base_index)) {
            return Some(s);
        }
    }
    None
}

/// Generate a dataset with planted near-replicates.
///
/// Each base moment is followed by a replicate with probability
/// `rho / (2 - rho)`, which makes the expected fraction of ground truths in
/// a pair equal to `rho`. Moments that are not partners stay below
/// [`ACCIDENTAL_MAX_TIOU`] of each other.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let duplicate_p = cfg.replicate_rate / (2.0 - cfg.replicate_rate);
    let mut dataset = Dataset::new();
    let mut planted = Vec::new();

    for v in 0..cfg.num_videos {
        let video_id = video_name(v);
        let duration = q(rng.random_range(cfg.duration_min..=cfg.duration_max));
        let count = rng.random_range(cfg.moments_min..=cfg.moments_max);
        let mut segments: Vec<Segment> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for _ in 0..count {
            let s = place_moment(&mut rng, cfg, duration, &segments).ok_or_else(|| Error::Video {
                video_id: video_id.clone(),
                reason: format!("could not place {count} moments in {duration} s"),
            })?;
            let label = rng.random_range(0..cfg.num_categories);
            segments.push(s);
            labels.push(label);
            if rng.random_bool(duplicate_p) {
                let base = segments.len() - 1;
                if let Some(r) = place_replicate(&mut rng, base, duration, &segments) {
                    let rl = if cfg.replicate_same_label { label } else { rng.random_range(0..cfg.num_categories) };
                    segments.push(r);
                    labels.push(rl);
                    pairs.push((base, segments.len() - 1));
                }
            }
        }

        let mut order: Vec<usize> = (0..segments.len()).collect();
        order.sort_by(|&a, &b| {
            segments[a].start().total_cmp(&segments[b].start()).then(segments[a].end().total_cmp(&segments[b].end()))
        });
        let mut position = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let ground_truths = order.iter().map(|&i| GroundTruth::new(segments[i], category_name(labels[i]))).collect();
        for (a, b) in pairs {
            let (first, second) = (position[a].min(position[b]), position[a].max(position[b]));
            planted.push(PlantedPair { video_id: video_id.clone(), first, second });
        }
        dataset.insert(video_id, Video { duration, ground_truths })?;
    }
    Ok(SynthDataset { dataset, planted })
}

struct Predictor<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    labels: Vec<String>,
}

impl Predictor<'_> {
    fn normal(&mut self, std: f64) -> f64 {
        if std == 0.0 {
            0.0
        } else {
            Normal::new(0.0, std).expect("std is finite and positive").sample(&mut self.rng)
        }
    }

    fn jittered(&mut self, gt: &GroundTruth, duration: f64, std: f64) -> ScoredSegment {
        let a = (gt.segment.start() + self.normal(std)).clamp(0.0, duration);
        let b = (gt.segment.end() + self.normal(std)).clamp(0.0, duration);
        let segment = Segment::new(q(a.min(b)), q(a.max(b))).expect("ordered");
        let iou = tiou(&segment, &gt.segment);
        let raw = self.cfg.score_base - self.cfg.score_slope * (1.0 - iou) + self.normal(self.cfg.score_noise);
        let mut label = gt.label.clone();
        if self.cfg.label_flip_rate > 0.0 && self.labels.len() > 1 && self.rng.random_bool(self.cfg.label_flip_rate) {
            let pick = self.rng.random_range(0..self.labels.len() - 1);
            let own = self.labels.iter().position(|l| *l == gt.label).unwrap_or(usize::MAX);
            label = self.labels[if pick >= own { pick + 1 } else { pick }].clone();
        }
        ScoredSegment { segment, label, score: q(raw.clamp(0.0, 1.0)) }
    }

    fn background(&mut self, duration: f64) -> ScoredSegment {
        let len = log_uniform(&mut self.rng, self.cfg.length_min, self.cfg.length_max.min(duration));
        let start = q(self.rng.random_range(0.0..=(duration - len)));
        let end = q((start + len).min(duration));
        let label = self.labels[self.rng.random_range(0..self.labels.len())].clone();
        let score = q(self.rng.random_range(0.0..=self.cfg.background_score_max));
        ScoredSegment { segment: Segment::new(start, end).expect("ordered"), label, score }
    }
}

/// A noisy oracle: one jittered copy per ground truth, extra duplicates,
/// label flips and uniform background false positives.
pub fn generate_predictions(dataset: &Dataset, cfg: &SynthConfig) -> Result<PredictionSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut labels: Vec<String> = (0..cfg.num_categories).map(category_name).collect();
    for l in dataset.categories() {
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    let mut p = Predictor { cfg, rng, labels };
    let dup_std = cfg.jitter_std * cfg.duplicate_jitter_scale;

    let mut out = BTreeMap::new();
    for (id, video) in dataset.iter() {
        let mut preds = Vec::new();
        for gt in &video.ground_truths {
            preds.push(p.jittered(gt, video.duration, cfg.jitter_std));
            for _ in 0..cfg.duplicate_trials {
                if cfg.duplicate_rate > 0.0 && p.rng.random_bool(cfg.duplicate_rate) {
                    preds.push(p.jittered(gt, video.duration, dup_std));
                }
            }
            if cfg.background_rate > 0.0 && p.rng.random_bool(cfg.background_rate) {
                preds.push(p.background(video.duration));
            }
        }
        out.insert(id.clone(), preds);
    }
    Ok(PredictionSet::from_map(out))
}

/// Settings for synthetic `assign-sim` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateSynthConfig {
    pub num_instances: usize,
    pub sequence_length: usize,
    pub num_levels: u32,
    pub num_classes: usize,
    pub gts_min: usize,
    pub gts_max: usize,
    pub seed: u64,
}

impl Default for CandidateSynthConfig {
    fn default() -> Self {
        Self { num_instances: 8, sequence_length: 128, num_levels: 4, num_classes: 5, gts_min: 1, gts_max: 4, seed: 0 }
    }
}

/// Pyramid candidates with plausible network outputs: points inside a
/// ground truth regress a jittered copy of it and score its class higher,
/// the rest predict short local segments with flat class scores.
pub fn generate_candidates(cfg: &CandidateSynthConfig) -> Result<Vec<AssignInstance>> {
    if cfg.num_classes == 0 || cfg.gts_min > cfg.gts_max {
        return Err(Error::Config("candidate synthesis needs classes and an ordered GT count range".into()));
    }
    let pyramid = PyramidConfig { num_levels: cfg.num_levels, base_stride: 1.0, regression_ranges: None };
    let points = generate_pyramid(cfg.sequence_length, &pyramid)?;
    let length = cfg.sequence_length as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");

    let mut out = Vec::with_capacity(cfg.num_instances);
    for n in 0..cfg.num_instances {
        let count = rng.random_range(cfg.gts_min..=cfg.gts_max);
        let ground_truths: Vec<GtInstance> = (0..count)
            .map(|_| {
                let len = log_uniform(&mut rng, 2.0, (length / 2.0).max(2.0)).min(length);
                let start = q(rng.random_range(0.0..=(length - len)));
                let segment = Segment::new(start, q((start + len).min(length))).expect("ordered");
                GtInstance { segment, label: rng.random_range(0..cfg.num_classes) }
            })
            .collect();
        let candidates = points
            .iter()
            .map(|p| {
                let host = ground_truths
                    .iter()
                    .filter(|g| g.segment.contains(p.time))
                    .min_by(|a, b| a.segment.duration().total_cmp(&b.segment.duration()));
                let mut class_probs: Vec<f64> = (0..cfg.num_classes).map(|_| q(rng.random_range(0.0..0.2))).collect();
                let decoded = match host {
                    Some(g) => {
                        let spread = 0.1 * g.segment.duration();
                        let closeness =
                            1.0 - (p.time - g.segment.center()).abs() / (0.5 * g.segment.duration()).max(1e-9);
                        class_probs[g.label] = q((0.3 + 0.6 * closeness + 0.1 * rng.random::<f64>()).clamp(0.0, 1.0));
                        let a = g.segment.start() + spread * jitter.sample(&mut rng);
                        let b = g.segment.end() + spread * jitter.sample(&mut rng);
                        (a.min(p.time), b.max(p.time))
                    }
                    None => {
                        let half = p.stride * rng.random_range(0.5..2.0);
                        (p.time - half, p.time + half)
                    }
                };
                let decoded = Segment::new(q(decoded.0.max(0.0)), q(decoded.1.min(length))).expect("ordered");
                CandidatePrediction { point: *p, class_probs, decoded }
            })
            .collect();
        out.push(AssignInstance { id: format!("seq_{n:04}"), candidates, ground_truths });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate, EvalConfig};

    fn small() -> SynthConfig {
        SynthConfig { num_videos: 20, seed: 7, ..SynthConfig::default() }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate_dataset(&small()).unwrap();
        let b = generate_dataset(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            generate_predictions(&a.dataset, &small()).unwrap(),
            generate_predictions(&b.dataset, &small()).unwrap()
        );
        let c = generate_dataset(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn planted_pairs_overlap_enough() {
        let s = generate_dataset(&small()).unwrap();
        assert!(!s.planted.is_empty());
        for p in &s.planted {
            let v = s.dataset.get(&p.video_id).unwrap();
            let iou = tiou(&v.ground_truths[p.first].segment, &v.ground_truths[p.second].segment);
            assert!(iou >= REPLICATE_MIN_TIOU);
        }
    }

    #[test]
    fn no_replicates_without_rate() {
        let s = generate_dataset(&SynthConfig { replicate_rate: 0.0, ..small() }).unwrap();
        assert!(s.planted.is_empty());
        assert_eq!(s.planted_fraction(), 0.0);
    }

    #[test]
    fn noiseless_predictor_is_perfect() {
        let cfg = small().noiseless();
        let s = generate_dataset(&cfg).unwrap();
        let p = generate_predictions(&s.dataset, &cfg).unwrap();
        assert_eq!(p.num_predictions(), s.dataset.num_ground_truths());
        let r = evaluate(&s.dataset, &p, &EvalConfig::default()).unwrap();
        assert_eq!(r.average_map, 1.0);
    }

    #[test]
    fn duplicates_only_gives_two_per_gt() {
        let cfg = SynthConfig { duplicate_rate: 1.0, duplicate_trials: 1, ..small().noiseless() };
        let s = generate_dataset(&cfg).unwrap();
        let p = generate_predictions(&s.dataset, &cfg).unwrap();
        assert_eq!(p.num_predictions(), 2 * s.dataset.num_ground_truths());
    }

    #[test]
    fn values_on_micro_grid() {
        let s = generate_dataset(&small()).unwrap();
        let p = generate_predictions(&s.dataset, &small()).unwrap();
        for (_, preds) in p.iter() {
            for x in preds {
                for v in [x.segment.start(), x.segment.end(), x.score] {
                    assert_eq!(round6(v), v);
                }
            }
        }
    }

    #[test]
    fn candidates_are_deterministic_and_valid() {
        let cfg = CandidateSynthConfig::default();
        let a = generate_candidates(&cfg).unwrap();
        assert_eq!(a, generate_candidates(&cfg).unwrap());
        assert_eq!(a.len(), 8);
        for inst in &a {
            assert_eq!(inst.candidates.len(), 128 + 64 + 32 + 16);
            for c in &inst.candidates {
                assert!(c.class_probs.iter().all(|p| (0.0..=1.0).contains(p)));
                assert!(c.decoded.start() >= 0.0 && c.decoded.end() <= 128.0);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_dataset(&SynthConfig { replicate_rate: 1.5, ..small() }).is_err());
        assert!(generate_dataset(&SynthConfig { length_min: 500.0, length_max: 600.0, ..small() }).is_err());
        // Too many moments for the video: cannot keep them apart.
        let crowded = SynthConfig {
            moments_min: 400,
            moments_max: 400,
            duration_min: 10.0,
            duration_max: 10.0,
            length_min: 5.0,
            length_max: 5.0,
            ..small()
        };
        assert!(generate_dataset(&crowded).is_err());
    }
}
