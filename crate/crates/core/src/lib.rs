//! Post-processing, label assignment and evaluation for temporal moment
//! localization.
//!
//! The crate is organised bottom-up:
//!
//! - [`segment`] and [`pyramid`]: interval geometry, temporal IoU, the 1D
//!   multi-scale candidate grid and offset decoding.
//! - [`nms`]: hard NMS and SoftNMS with linear or Gaussian decay.
//! - [`assign`]: center sampling and SimOTA dynamic label assignment.
//! - [`eval`]: per-category AP, average mAP and Recall@kx.
//! - [`diagnose`]: near-replicate statistics and DETAD-style error analysis.
//! - [`synth`]: seeded synthetic datasets and noisy predictors.
//! - [`formats`]: the JSON interchange files read and written by the CLI.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod dataset;
pub mod diagnose;
pub mod error;
pub mod eval;
pub mod formats;
pub mod nms;
pub mod pipeline;
pub mod pyramid;
pub mod segment;
pub mod synth;

pub use dataset::{Dataset, GroundTruth, PredictionSet, Video};
pub use error::{Error, Result};
pub use segment::{tiou, ScoredSegment, Segment};

/// Round to the 1e-6 grid used by every emitted file.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
