//! JSON interchange files.
//!
//! Ground truth:
//!
//! ```json
//! {"version": "1.0", "videos": [{"video_id": "v1", "duration_sec": 120.0,
//!   "annotations": [{"label": "cut", "segment": [3.5, 9.0]}]}]}
//! ```
//!
//! Predictions:
//!
//! ```json
//! {"version": "1.0", "results": {"v1": [{"label": "cut", "segment": [3.4, 9.1], "score": 0.82}]}}
//! ```
//!
//! Writers round every real to 6 decimals and emit keys in a fixed order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::{CandidatePrediction, GtInstance};
use crate::dataset::{Dataset, GroundTruth, PredictionSet, Video};
use crate::error::{Error, Result};
use crate::pyramid::PyramidPoint;
use crate::round6;
use crate::segment::{ScoredSegment, Segment};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub label: String,
    pub segment: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub duration_sec: f64,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub version: String,
    pub videos: Vec<VideoRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub label: String,
    pub segment: [f64; 2],
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionFile {
    #[serde(default = "default_version")]
    pub version: String,
    pub results: BTreeMap<String, Vec<PredictionRecord>>,
}

fn default_version() -> String {
    FORMAT_VERSION.to_string()
}

/// Result of ingestion plus any boundary clamps applied in lenient mode.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn record_err(video_id: &str, index: usize, reason: impl Into<String>) -> Error {
    Error::Record { video_id: video_id.to_string(), index, reason: reason.into() }
}

/// Validate a raw `[start, end]` against `[0, duration]`: reversed or
/// non-finite segments always fail; out-of-range ones fail in strict mode
/// and are clamped otherwise.
fn check_segment(
    raw: [f64; 2],
    duration: f64,
    strict: bool,
    video_id: &str,
    index: usize,
    warnings: &mut Vec<String>,
) -> Result<Segment> {
    let seg = Segment::new(raw[0], raw[1]).map_err(|e| record_err(video_id, index, e.to_string()))?;
    if seg.within(duration) {
        return Ok(seg);
    }
    if strict {
        return Err(record_err(video_id, index, format!("segment [{}, {}] outside [0, {duration}]", raw[0], raw[1])));
    }
    let clamped = seg.clamp(0.0, duration);
    let msg = format!(
        "video {video_id:?}, record {index}: segment [{}, {}] clamped to [{}, {}]",
        raw[0],
        raw[1],
        clamped.start(),
        clamped.end()
    );
    log::warn!("{msg}");
    warnings.push(msg);
    Ok(clamped)
}

fn check_version(v: &str) -> Result<()> {
    if v.split('.').next() != Some("1") {
        return Err(Error::Config(format!("unsupported format version {v:?}")));
    }
    Ok(())
}

pub fn parse_ground_truth(text: &str, strict: bool) -> Result<Ingested<Dataset>> {
    let file: GroundTruthFile = serde_json::from_str(text)?;
    check_version(&file.version)?;
    let mut dataset = Dataset::new();
    let mut warnings = Vec::new();
    for v in file.videos {
        if !(v.duration_sec > 0.0) || !v.duration_sec.is_finite() {
            return Err(Error::Video {
                video_id: v.video_id,
                reason: format!("duration {} is not positive", v.duration_sec),
            });
        }
        let mut gts = Vec::with_capacity(v.annotations.len());
        for (i, a) in v.annotations.into_iter().enumerate() {
            let seg = check_segment(a.segment, v.duration_sec, strict, &v.video_id, i, &mut warnings)?;
            gts.push(GroundTruth::new(seg, a.label));
        }
        dataset.insert(v.video_id, Video { duration: v.duration_sec, ground_truths: gts })?;
    }
    Ok(Ingested { value: dataset, warnings })
}

/// Parse a prediction file. With a dataset, unknown video ids are rejected
/// and segments are checked against each video's duration; without one only
/// ordering and score range are checked.
pub fn parse_predictions(text: &str, dataset: Option<&Dataset>, strict: bool) -> Result<Ingested<PredictionSet>> {
    let file: PredictionFile = serde_json::from_str(text)?;
    check_version(&file.version)?;
    let mut warnings = Vec::new();
    let mut out = BTreeMap::new();
    for (video_id, records) in file.results {
        let duration = match dataset {
            Some(d) => Some(
                d.get(&video_id)
                    .ok_or_else(|| Error::Video {
                        video_id: video_id.clone(),
                        reason: "not present in the ground truth".into(),
                    })?
                    .duration,
            ),
            None => None,
        };
        let mut preds = Vec::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            let seg = match duration {
                Some(d) => check_segment(r.segment, d, strict, &video_id, i, &mut warnings)?,
                None => {
                    Segment::new(r.segment[0], r.segment[1]).map_err(|e| record_err(&video_id, i, e.to_string()))?
                }
            };
            let p = ScoredSegment::new(seg, r.label, r.score).map_err(|e| record_err(&video_id, i, e.to_string()))?;
            preds.push(p);
        }
        out.insert(video_id, preds);
    }
    Ok(Ingested { value: PredictionSet::from_map(out), warnings })
}

fn seg6(s: &Segment) -> [f64; 2] {
    [round6(s.start()), round6(s.end())]
}

pub fn ground_truth_file(dataset: &Dataset) -> GroundTruthFile {
    GroundTruthFile {
        version: FORMAT_VERSION.into(),
        videos: dataset
            .iter()
            .map(|(id, v)| VideoRecord {
                video_id: id.clone(),
                duration_sec: round6(v.duration),
                annotations: v
                    .ground_truths
                    .iter()
                    .map(|g| AnnotationRecord { label: g.label.clone(), segment: seg6(&g.segment) })
                    .collect(),
            })
            .collect(),
    }
}

pub fn prediction_file(preds: &PredictionSet) -> PredictionFile {
    PredictionFile {
        version: FORMAT_VERSION.into(),
        results: preds
            .iter()
            .map(|(id, p)| {
                let recs = p
                    .iter()
                    .map(|x| PredictionRecord {
                        label: x.label.clone(),
                        segment: seg6(&x.segment),
                        score: round6(x.score),
                    })
                    .collect();
                (id.clone(), recs)
            })
            .collect(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Round every float in a JSON document to 6 decimals.
pub fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round6(x)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serialize a report with every float rounded to 6 decimals.
pub fn report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    to_json(&v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub time: f64,
    #[serde(default)]
    pub level: u32,
    pub stride: f64,
    /// Regression range in base-stride units; `null` upper bound is open.
    #[serde(default = "open_range")]
    pub range: (f64, Option<f64>),
    pub class_probs: Vec<f64>,
    pub segment: [f64; 2],
}

fn open_range() -> (f64, Option<f64>) {
    (0.0, None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceGtRecord {
    pub label: usize,
    pub segment: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub candidates: Vec<CandidateRecord>,
    pub ground_truths: Vec<InstanceGtRecord>,
}

/// Input of `assign-sim`: candidate predictions and ground truths for a
/// set of sequences sharing one label vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateFile {
    pub version: String,
    pub num_classes: usize,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignInstance {
    pub id: String,
    pub candidates: Vec<CandidatePrediction>,
    pub ground_truths: Vec<GtInstance>,
}

pub fn parse_candidates(text: &str) -> Result<(usize, Vec<AssignInstance>)> {
    let file: CandidateFile = serde_json::from_str(text)?;
    check_version(&file.version)?;
    let mut out = Vec::with_capacity(file.instances.len());
    for inst in file.instances {
        let mut candidates = Vec::with_capacity(inst.candidates.len());
        for (i, c) in inst.candidates.into_iter().enumerate() {
            let decoded = Segment::try_from(c.segment).map_err(|e| record_err(&inst.id, i, e.to_string()))?;
            if !(c.stride > 0.0) || !c.time.is_finite() {
                return Err(record_err(&inst.id, i, "stride must be positive and time finite"));
            }
            let range_max = c.range.1.unwrap_or(f64::INFINITY);
            if !(c.range.0 < range_max) {
                return Err(record_err(&inst.id, i, "empty regression range"));
            }
            candidates.push(CandidatePrediction {
                point: PyramidPoint { time: c.time, level: c.level, stride: c.stride, range_min: c.range.0, range_max },
                class_probs: c.class_probs,
                decoded,
            });
        }
        let mut ground_truths = Vec::with_capacity(inst.ground_truths.len());
        for (i, g) in inst.ground_truths.into_iter().enumerate() {
            let segment = Segment::try_from(g.segment).map_err(|e| record_err(&inst.id, i, e.to_string()))?;
            ground_truths.push(GtInstance { segment, label: g.label });
        }
        out.push(AssignInstance { id: inst.id, candidates, ground_truths });
    }
    Ok((file.num_classes, out))
}

pub fn candidate_file(num_classes: usize, instances: &[AssignInstance]) -> CandidateFile {
    CandidateFile {
        version: FORMAT_VERSION.into(),
        num_classes,
        instances: instances
            .iter()
            .map(|inst| InstanceRecord {
                id: inst.id.clone(),
                candidates: inst
                    .candidates
                    .iter()
                    .map(|c| CandidateRecord {
                        time: round6(c.point.time),
                        level: c.point.level,
                        stride: round6(c.point.stride),
                        range: (c.point.range_min, c.point.range_max.is_finite().then_some(c.point.range_max)),
                        class_probs: c.class_probs.iter().map(|&p| round6(p)).collect(),
                        segment: seg6(&c.decoded),
                    })
                    .collect(),
                ground_truths: inst
                    .ground_truths
                    .iter()
                    .map(|g| InstanceGtRecord { label: g.label, segment: seg6(&g.segment) })
                    .collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GT: &str = r#"{"version": "1.0", "videos": [
        {"video_id": "v1", "duration_sec": 10.0,
         "annotations": [{"label": "a", "segment": [1.0, 4.0]}]}]}"#;

    #[test]
    fn minimal_ground_truth() {
        let d = parse_ground_truth(GT, true).unwrap().value;
        assert_eq!(d.len(), 1);
        assert_eq!(d.num_ground_truths(), 1);
    }

    #[test]
    fn reversed_segment_names_record() {
        let bad = GT.replace("[1.0, 4.0]", "[5.0, 4.0]");
        let err = parse_ground_truth(&bad, true).unwrap_err().to_string();
        assert!(err.contains("\"v1\"") && err.contains("record 0"), "{err}");
        assert!(parse_ground_truth(&bad, false).is_err());
    }

    #[test]
    fn out_of_range_strict_vs_lenient() {
        let bad = GT.replace("[1.0, 4.0]", "[1.0, 12.0]");
        assert!(parse_ground_truth(&bad, true).is_err());
        let ok = parse_ground_truth(&bad, false).unwrap();
        assert_eq!(ok.warnings.len(), 1);
        assert_eq!(ok.value.get("v1").unwrap().ground_truths[0].segment.end(), 10.0);
    }

    #[test]
    fn zero_duration_rejected() {
        let bad = GT.replace("10.0", "0.0");
        assert!(parse_ground_truth(&bad, false).is_err());
        assert!(parse_ground_truth(&GT.replace("\"1.0\"", "\"2.0\""), false).is_err());
    }

    #[test]
    fn predictions_validation() {
        let d = parse_ground_truth(GT, true).unwrap().value;
        let ok = r#"{"results": {"v1": [{"label": "a", "segment": [1, 4], "score": 0.5}]}}"#;
        assert_eq!(parse_predictions(ok, Some(&d), true).unwrap().value.num_predictions(), 1);
        let high = ok.replace("0.5", "1.5");
        assert!(parse_predictions(&high, Some(&d), true).is_err());
        let unknown = ok.replace("\"v1\"", "\"v2\"");
        assert!(parse_predictions(&unknown, Some(&d), true).is_err());
        assert!(parse_predictions(&unknown, None, true).is_ok());
        let empty = r#"{"version": "1.0", "results": {"v1": []}}"#;
        assert_eq!(parse_predictions(empty, Some(&d), true).unwrap().value.len(), 1);
    }

    #[test]
    fn candidates_round_trip() {
        let text = r#"{"version": "1.0", "num_classes": 2, "instances": [{"id": "s0",
            "candidates": [{"time": 1.5, "stride": 1.0, "class_probs": [0.2, 0.7], "segment": [0.0, 3.0]},
                           {"time": 3.0, "level": 1, "stride": 2.0, "range": [4.0, null], "class_probs": [0.5, 0.5], "segment": [1.0, 5.0]}],
            "ground_truths": [{"label": 1, "segment": [0.5, 3.5]}]}]}"#;
        let (n, inst) = parse_candidates(text).unwrap();
        assert_eq!(n, 2);
        assert_eq!(inst[0].candidates[1].point.range_max, f64::INFINITY);
        let again = to_json(&candidate_file(n, &inst)).unwrap();
        assert_eq!(parse_candidates(&again).unwrap(), (n, inst));
    }

    #[test]
    fn report_rounding() {
        let v = serde_json::json!({"x": 0.1234567891, "y": [1.0, 2.0000004], "n": 3});
        let s = report_json(&v).unwrap();
        assert!(s.contains("0.123457"), "{s}");
        assert!(s.contains("2.0"), "{s}");
        assert!(s.contains("\"n\": 3"));
    }
}
