use thiserror::Error;

/// Errors raised by the estimators, simulators and metrics in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("record {index}: accident + delay = {total} exceeds horizon {horizon}")]
    TruncationViolated {
        index: usize,
        total: f64,
        horizon: f64,
    },

    #[error("dataset must be normalized to horizon 1")]
    NotNormalized,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset carries no positive payment amount")]
    NoPositiveAmount,

    #[error("reversed time {time}: {mass} paid while only {exposure} is at risk")]
    DegenerateRiskSet { time: f64, mass: f64, exposure: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("interval [{0}, {1}] is reversed")]
    ReversedInterval(f64, f64),

    #[error("chain-ladder breakdown: development factor {column} has zero pooled denominator")]
    ChainLadderBreakdown { column: usize },

    #[error("triangle cell ({row}, {col}) lies beyond the observed diagonal")]
    ForbiddenCell { row: usize, col: usize },

    #[error("every grid point is singular for the local linear fit")]
    AllSingular,

    #[error("every bandwidth candidate scored +inf")]
    NoFiniteScore,

    #[error("observed-region mass is not positive ({0})")]
    DegenerateDensity(f64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("acceptance probability {0:.3e} is below 1e-4")]
    LowAcceptance(f64),

    #[error("{0}")]
    Diagnostic(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
