use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid qubit targets {targets:?} for a {n}-qubit register")]
    InvalidTargets { targets: Vec<usize>, n: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("{n} qubits exceeds the dense simulation limit of {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("qubit count must be even, got {0}")]
    OddQubitCount(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("objective returned a non-finite value at evaluation {evaluation}")]
    NonFinite { evaluation: u64 },

    #[error("malformed shadow file: {0}")]
    ShadowFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
