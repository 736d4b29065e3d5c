use alloc::string::String;

/// Errors raised by the analytical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,
    #[error("non-finite value at day index {0}")]
    NonFinite(usize),
    #[error("series has {len} points, at least {needed} required")]
    TooShort { len: usize, needed: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index {index} has {available} qualifying prior points, {needed} required")]
    InsufficientHistory {
        index: usize,
        available: usize,
        needed: usize,
    },
    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("event belongs to {event}, series is {series}")]
    SeriesMismatch { event: String, series: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty feature vector")]
    EmptyFeatures,
    #[error("cannot split {points} points into {strips} strips")]
    DegenerateStrips { points: usize, strips: usize },
    #[error("{shapes} shapes cannot form {k} clusters")]
    TooFewShapes { shapes: usize, k: usize },
    #[error("events {first} and {second} overlap")]
    OverlapViolation { first: u32, second: u32 },
    #[error("event id {0} appears more than once")]
    DuplicateEventId(u32),
    #[error("total event duration {total} exceeds series length {len}")]
    Infeasible { total: usize, len: usize },
    #[error("confidence intervals need at least 2 runs, got {0}")]
    DegenerateCi(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
