use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid segment [{start}, {end}]: {reason}")]
    InvalidSegment { start: f64, end: f64, reason: &'static str },

    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("video {video_id:?}, record {index}: {reason}")]
    Record { video_id: String, index: usize, reason: String },

    #[error("video {video_id:?}: {reason}")]
    Video { video_id: String, reason: String },

    #[error("candidate {index}: expected {expected} class probabilities, got {got}")]
    ClassCount { index: usize, expected: usize, got: usize },

    #[error("malformed input: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
