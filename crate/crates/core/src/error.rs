use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error)]
pub enum HkError {
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("size mismatch: expected {expected} agents, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-deterministic dynamics require dimension 1, found {0}")]
    DimensionNotOne(usize),

    #[error("noise value {value} at t={t}, agent {agent} lies outside [-{bound}, {bound}]")]
    NoiseOutOfRange {
        value: f64,
        bound: f64,
        t: usize,
        agent: usize,
    },

    #[error("schedule is not friendly at t={t}: {pairs:?} lost their edge while staying in range")]
    FriendlinessViolation {
        t: usize,
        pairs: Vec<(usize, usize)>,
    },

    #[error("inconsistent arguments: {0}")]
    Inconsistent(String),

    #[error("spectral diagnostics requested for n={n} above the limit {limit}")]
    SpectralLimit { n: usize, limit: usize },

    #[error("estimated work {estimate:.3e} exceeds budget {budget:.3e}; pass force to run anyway")]
    Budget { estimate: f64, budget: f64 },

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, HkError>;

impl HkError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HkError::Io {
            path: path.into(),
            source,
        }
    }
}
