use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A half-open time interval `[start, end)` in seconds.
///
/// Zero-length segments are allowed (degenerate annotations occur in real
/// data); `start > end` and non-finite endpoints are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Segment {
    start: f64,
    end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidSegment { start, end, reason: "non-finite endpoint" });
        }
        if start > end {
            return Err(Error::InvalidSegment { start, end, reason: "start after end" });
        }
        Ok(Self { start, end })
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    #[inline]
    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Closed containment test, so a point on either boundary counts.
    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    #[inline]
    pub fn intersection(&self, other: &Segment) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    /// Clamp both endpoints into `[lo, hi]`.
    pub fn clamp(&self, lo: f64, hi: f64) -> Segment {
        let start = self.start.clamp(lo, hi);
        let end = self.end.clamp(lo, hi);
        Segment { start, end: end.max(start) }
    }

    /// Whether the segment lies inside `[0, duration]`.
    pub fn within(&self, duration: f64) -> bool {
        self.start >= 0.0 && self.end <= duration
    }
}

impl TryFrom<[f64; 2]> for Segment {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Segment::new(v[0], v[1])
    }
}

impl From<Segment> for [f64; 2] {
    fn from(s: Segment) -> Self {
        [s.start, s.end]
    }
}

/// Temporal IoU of two segments.
///
/// Returns 0 when the union has zero length, which includes two identical
/// zero-length segments.
pub fn tiou(a: &Segment, b: &Segment) -> f64 {
    let inter = a.intersection(b);
    let union = a.duration() + b.duration() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// A labelled, scored segment: the unit NMS and evaluation operate on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub segment: Segment,
    pub label: String,
    pub score: f64,
}

impl ScoredSegment {
    pub fn new(segment: Segment, label: impl Into<String>, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self { segment, label: label.into(), score })
    }
}
