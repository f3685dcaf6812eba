use thiserror::Error;

/// Errors produced by problem construction, scheme runs, and analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("map is not a contraction: operator norm {norm} >= 1")]
    NotContractive { norm: f64 },

    #[error("lipschitz constant {delta} outside (0,1)")]
    InvalidDelta { delta: f64 },

    #[error("non-finite iterate produced at step {step}")]
    DivergedIterate { step: usize },

    #[error("fixed point is not known for this problem")]
    MissingFixedPoint,

    #[error("schedule inadmissible: {reason}")]
    InadmissibleSchedule { reason: String },

    #[error("perturbation offset norm {norm} exceeds epsilon budget {epsilon}")]
    OffsetBudgetExceeded { norm: f64, epsilon: f64 },

    #[error("mismatched runs: {reason}")]
    MismatchedRuns { reason: String },

    #[error("sequence too short: need at least {min}, got {got}")]
    SequenceTooShort { min: usize, got: usize },

    #[error("invalid sequence data: {reason}")]
    InvalidSequence { reason: String },

    #[error("exact oracle supports constant schedules only")]
    NonConstantSchedule,
}

pub type Result<T> = std::result::Result<T, Error>;
