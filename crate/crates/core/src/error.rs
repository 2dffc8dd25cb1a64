//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Requested sub-basis partition does not fit in the master basis.
    #[error("infeasible partition: {n} antennas x {k_s} columns > {k} available")]
    InfeasiblePartition { n: usize, k_s: usize, k: usize },

    /// The zone constraints left no room for communication symbols.
    #[error(
        "no null-space dimensions left for antenna {antenna}: \
         constraint rank {rank} >= K_s = {k_s}; reduce the zone length, \
         the antenna count, or enlarge K_s"
    )]
    NullSpaceExhausted { antenna: usize, rank: usize, k_s: usize },

    /// A symbol frame does not match the antenna's computed capacity.
    #[error("antenna {antenna}: expected {expected} symbols, got {got}")]
    SymbolCountMismatch { antenna: usize, expected: usize, got: usize },

    /// The communication receiver cannot separate the transmitted streams.
    #[error("decode infeasible: {0}")]
    DecodeInfeasible(String),

    /// Decode aborted on an internal dimension inconsistency.
    #[error("decode aborted: {0}")]
    DecodeAbort(String),

    /// Array/sequence dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A mask region required by a metric is empty.
    #[error("empty {0} region")]
    EmptyRegion(&'static str),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed artifact file content.
    #[error("malformed file {path}: {detail}")]
    Format { path: String, detail: String },
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }
}
