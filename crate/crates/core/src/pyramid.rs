//! The 1D multi-scale candidate grid and offset decoding.
//!
//! Level `l` has stride `base_stride * 2^l`; each location is the center of
//! a candidate moment. Regression ranges are expressed in base-stride units
//! (input steps) so that consecutive levels tile `[0, inf)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidPoint {
    pub time: f64,
    pub level: u32,
    pub stride: f64,
    pub range_min: f64,
    pub range_max: f64,
}

impl PyramidPoint {
    /// Stride of the finest level this point's pyramid was built from.
    pub fn base_stride(&self) -> f64 {
        self.stride / f64::from(1u32 << self.level)
    }

    /// Regression range converted to seconds.
    pub fn range_seconds(&self) -> (f64, f64) {
        let b = self.base_stride();
        (self.range_min * b, self.range_max * b)
    }
}

/// Predicted distances from a point to the onset and offset, in units of the
/// point's stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutput {
    pub d_onset: f64,
    pub d_offset: f64,
}

impl RegressionOutput {
    pub fn new(d_onset: f64, d_offset: f64) -> Result<Self> {
        if !(d_onset >= 0.0 && d_offset >= 0.0) || !d_onset.is_finite() || !d_offset.is_finite() {
            return Err(Error::Config(format!(
                "regression offsets must be finite and non-negative, got ({d_onset}, {d_offset})"
            )));
        }
        Ok(Self { d_onset, d_offset })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    pub num_levels: u32,
    pub base_stride: f64,
    /// One `(min, max)` pair per level in base-stride units. `None` selects
    /// [`default_ranges`].
    pub regression_ranges: Option<Vec<(f64, f64)>>,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self { num_levels: 6, base_stride: 1.0, regression_ranges: None }
    }
}

/// `[0,4), [4,8), [8,16), ...` with the last level open-ended.
pub fn default_ranges(num_levels: u32) -> Vec<(f64, f64)> {
    (0..num_levels)
        .map(|l| {
            let lo = if l == 0 { 0.0 } else { 4.0 * f64::from(1u32 << (l - 1)) };
            let hi = if l + 1 == num_levels { f64::INFINITY } else { 4.0 * f64::from(1u32 << l) };
            (lo, hi)
        })
        .collect()
}

fn check_ranges(ranges: &[(f64, f64)], num_levels: u32) -> Result<()> {
    if ranges.len() != num_levels as usize {
        return Err(Error::Config(format!("{} regression ranges given for {num_levels} levels", ranges.len())));
    }
    let mut expected_lo = 0.0;
    for (l, &(lo, hi)) in ranges.iter().enumerate() {
        if lo != expected_lo || !(lo < hi) {
            return Err(Error::Config(format!(
                "regression range {l} [{lo}, {hi}) does not continue the tiling from {expected_lo}"
            )));
        }
        expected_lo = hi;
    }
    if expected_lo != f64::INFINITY {
        return Err(Error::Config("last regression range must be open-ended".into()));
    }
    Ok(())
}

/// Candidate points for a sequence of `sequence_length` base steps.
///
/// Level `l` holds `ceil(T / 2^l)` points at `(i + 0.5) * stride(l)`.
pub fn generate_pyramid(sequence_length: usize, config: &PyramidConfig) -> Result<Vec<PyramidPoint>> {
    let PyramidConfig { num_levels, base_stride, .. } = *config;
    if sequence_length == 0 {
        return Err(Error::Config("sequence_length must be at least 1".into()));
    }
    if num_levels == 0 || num_levels > 32 {
        return Err(Error::Config(format!("num_levels must be in 1..=32, got {num_levels}")));
    }
    if !(base_stride > 0.0) || !base_stride.is_finite() {
        return Err(Error::Config(format!("base_stride must be positive, got {base_stride}")));
    }
    let top = 1usize << (num_levels - 1);
    if top > sequence_length {
        return Err(Error::Config(format!(
            "{num_levels} levels need at least {top} steps, sequence has {sequence_length}"
        )));
    }
    let ranges = match &config.regression_ranges {
        Some(r) => {
            check_ranges(r, num_levels)?;
            r.clone()
        }
        None => default_ranges(num_levels),
    };

    let mut points = Vec::new();
    for (level, &(range_min, range_max)) in (0..num_levels).zip(ranges.iter()) {
        let factor = 1usize << level;
        let stride = base_stride * factor as f64;
        let count = sequence_length.div_ceil(factor);
        points.extend((0..count).map(|i| PyramidPoint {
            time: (i as f64 + 0.5) * stride,
            level,
            stride,
            range_min,
            range_max,
        }));
    }
    Ok(points)
}

/// Turn a point and its predicted offsets into a segment, optionally clamped
/// into `[0, duration]`.
pub fn decode(point: &PyramidPoint, reg: &RegressionOutput, duration: Option<f64>) -> Segment {
    let start = point.time - reg.d_onset * point.stride;
    let end = point.time + reg.d_offset * point.stride;
    // Non-negative offsets guarantee start <= end.
    let seg = Segment::new(start, end).expect("decoded segment is ordered");
    match duration {
        Some(d) => seg.clamp(0.0, d),
        None => seg,
    }
}

/// Inverse of [`decode`] for a segment containing the point's time.
pub fn encode(point: &PyramidPoint, segment: &Segment) -> Result<RegressionOutput> {
    if !segment.contains(point.time) {
        return Err(Error::Config(format!(
            "point at {} lies outside [{}, {}]",
            point.time,
            segment.start(),
            segment.end()
        )));
    }
    RegressionOutput::new((point.time - segment.start()) / point.stride, (segment.end() - point.time) / point.stride)
}
