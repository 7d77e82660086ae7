use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("eigen-solver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("design matrix columns are not linearly independent")]
    SingularDesign,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("solver hit iteration cap ({0} iterations)")]
    MaxItersExceeded(usize),

    #[error("coordinate descent hit sweep cap ({0} sweeps)")]
    MaxSweepsExceeded(usize),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),

    #[error("file has no data rows")]
    EmptyFile,

    #[error("split leaves an empty side ({train} train / {test} test rows)")]
    TooFewRows { train: usize, test: usize },

    #[error("mask index {index} out of range for length {len}")]
    MaskOutOfRange { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
