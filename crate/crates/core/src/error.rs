use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Player/arm counts must satisfy `1 <= m < k`.
    #[error("invalid player/arm counts: k={k}, m={m} (need 1 <= m < k)")]
    BadCounts { k: usize, m: usize },

    /// A partition vertex failed structural validation.
    #[error("invalid partition vertex: {0}")]
    BadVertex(String),

    /// `range` is undefined on a leaf (no undecided block).
    #[error("range is undefined on a leaf")]
    RangeOfLeaf,

    /// `gap` is undefined on the root (no inequality yet).
    #[error("gap is undefined on the root")]
    GapOfRoot,

    /// Input vector coordinate outside `[0, 1]`.
    #[error("coordinate {index} = {value} outside [0, 1]")]
    CoordinateOutOfRange { index: usize, value: f64 },

    /// Vector length does not match the arm count.
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// No child met the cut threshold (violated caller contract).
    #[error("no child with gap >= {threshold} (threshold above range/K?)")]
    NoQualifyingChild { threshold: f64 },

    /// Schedule input rejected.
    #[error("invalid schedule: {0}")]
    BadSchedule(String),

    /// Text parsing failed (vertex strings, instance files, config files).
    #[error("parse error: {0}")]
    Parse(String),

    /// Experiment configuration rejected.
    #[error("invalid config: {0}")]
    BadConfig(String),

    /// Result set was empty where data is required.
    #[error("empty result set: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
