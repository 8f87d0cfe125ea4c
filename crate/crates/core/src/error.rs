use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} {id} not found")]
    NotFound { what: &'static str, id: String },

    #[error("user {0} has no usable ratings (rating sum is zero or no rated items)")]
    DegenerateUser(u32),

    #[error("invalid rating {value} for ({user}, {item}): {reason}")]
    InvalidRating {
        user: String,
        item: String,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid similarity table: {0}")]
    InvalidSimilarity(String),

    #[error("feature vector has zero norm")]
    DegenerateVector,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("infeasible transport problem: {0}")]
    InfeasibleProblem(String),

    #[error("invalid cost entry at ({row}, {col}): {value}")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("oracle supports at most {limit} total support points, got {got}")]
    OracleLimitExceeded { limit: usize, got: usize },

    #[error("entropic solver did not converge after {iterations} iterations (marginal error {marginal_error:e})")]
    ConvergenceFailure {
        iterations: usize,
        marginal_error: f64,
    },

    #[error("distance {distance} outside [0, {d_max}]")]
    InvalidDistance { distance: f64, d_max: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cache {path} is invalid: {reason}")]
    CacheInvalid { path: PathBuf, reason: String },

    #[error("empty test set")]
    EmptyTestSet,

    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),

    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),

    #[error("measure {measure} requires {requirement}")]
    MissingInput {
        measure: &'static str,
        requirement: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
