use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::segment::{ScoredSegment, Segment};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub segment: Segment,
    pub label: String,
}

impl GroundTruth {
    pub fn new(segment: Segment, label: impl Into<String>) -> Self {
        Self { segment, label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub duration: f64,
    pub ground_truths: Vec<GroundTruth>,
}

/// Annotated videos keyed by id. Iteration order is the sorted id order,
/// which every reduction in the crate relies on for determinism.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    videos: BTreeMap<String, Video>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a video, checking `duration > 0` and that every ground truth
    /// lies inside `[0, duration]`.
    pub fn insert(&mut self, video_id: impl Into<String>, video: Video) -> Result<()> {
        let video_id = video_id.into();
        if !(video.duration > 0.0) || !video.duration.is_finite() {
            return Err(Error::Video { video_id, reason: format!("duration {} is not positive", video.duration) });
        }
        for (index, gt) in video.ground_truths.iter().enumerate() {
            if !gt.segment.within(video.duration) {
                return Err(Error::Record {
                    video_id,
                    index,
                    reason: format!(
                        "segment [{}, {}] outside [0, {}]",
                        gt.segment.start(),
                        gt.segment.end(),
                        video.duration
                    ),
                });
            }
        }
        if self.videos.contains_key(&video_id) {
            return Err(Error::Video { video_id, reason: "duplicate video id".into() });
        }
        self.videos.insert(video_id, video);
        Ok(())
    }

    pub fn get(&self, video_id: &str) -> Option<&Video> {
        self.videos.get(video_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Video)> {
        self.videos.iter()
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn num_ground_truths(&self) -> usize {
        self.videos.values().map(|v| v.ground_truths.len()).sum()
    }

    /// Sorted, de-duplicated labels occurring in the ground truth.
    pub fn categories(&self) -> Vec<String> {
        let mut labels: Vec<String> =
            self.videos.values().flat_map(|v| v.ground_truths.iter().map(|g| g.label.clone())).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Copy of the dataset keeping only ground truths for which `keep`
    /// returns true. Videos are retained even when emptied.
    pub fn filter_ground_truths(&self, mut keep: impl FnMut(&str, usize, &GroundTruth) -> bool) -> Dataset {
        let videos = self
            .videos
            .iter()
            .map(|(id, v)| {
                let gts = v
                    .ground_truths
                    .iter()
                    .enumerate()
                    .filter(|(i, g)| keep(id, *i, g))
                    .map(|(_, g)| g.clone())
                    .collect();
                (id.clone(), Video { duration: v.duration, ground_truths: gts })
            })
            .collect();
        Dataset { videos }
    }
}

/// Predictions keyed by video id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    videos: BTreeMap<String, Vec<ScoredSegment>>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a prediction set, rejecting ids that the dataset does not know.
    pub fn for_dataset(dataset: &Dataset, videos: BTreeMap<String, Vec<ScoredSegment>>) -> Result<Self> {
        if let Some(id) = videos.keys().find(|id| dataset.get(id).is_none()) {
            return Err(Error::Video { video_id: id.clone(), reason: "not present in the ground truth".into() });
        }
        Ok(Self { videos })
    }

    /// Build without a dataset check. Used by code that already derived the
    /// ids from a dataset.
    pub fn from_map(videos: BTreeMap<String, Vec<ScoredSegment>>) -> Self {
        Self { videos }
    }

    pub fn insert(&mut self, video_id: impl Into<String>, preds: Vec<ScoredSegment>) {
        self.videos.insert(video_id.into(), preds);
    }

    pub fn get(&self, video_id: &str) -> &[ScoredSegment] {
        self.videos.get(video_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<ScoredSegment>)> {
        self.videos.iter()
    }

    pub fn into_inner(self) -> BTreeMap<String, Vec<ScoredSegment>> {
        self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn num_predictions(&self) -> usize {
        self.videos.values().map(Vec::len).sum()
    }

    pub fn map_videos(&self, f: impl Fn(&str, &[ScoredSegment]) -> Vec<ScoredSegment>) -> PredictionSet {
        PredictionSet { videos: self.videos.iter().map(|(id, p)| (id.clone(), f(id, p))).collect() }
    }
}
