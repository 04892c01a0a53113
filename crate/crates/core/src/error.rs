//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds tolerance {tol:e}")]
    NonSymmetric { max_asym: f64, tol: f64 },

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} contains a non-finite value")]
    NonFiniteRow { row: usize },

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("n must be at least {min}, got {got}")]
    InvalidN { min: usize, got: usize },

    #[error("subsample size {requested} exceeds pool size {available}")]
    PoolExhausted { requested: usize, available: usize },

    #[error("metric `{name}` cannot store value {value}")]
    InvalidMetric { name: String, value: f64 },

    #[error("iterations for metric `{name}` must be strictly increasing (got {got} after {last})")]
    NonIncreasingIteration { name: String, last: u32, got: u32 },

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("response has zero variance")]
    ZeroVariance,

    #[error("covariates are collinear")]
    Collinear,

    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown key `{key}` (allowed: {allowed})")]
    UnknownKey { key: String, allowed: String },

    #[error("unsupported value `{got}` for `{key}` (allowed: {allowed})")]
    UnknownValue { key: String, got: String, allowed: String },

    #[error("grid for `{0}` is empty")]
    EmptyGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
