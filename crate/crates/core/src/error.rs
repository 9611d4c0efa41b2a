use thiserror::Error;

use crate::geometry::ManifoldId;

#[derive(Debug, Error)]
pub enum VfError {
    #[error("manifold mismatch: expected {expected:?}, got {got:?}")]
    ManifoldMismatch { expected: ManifoldId, got: ManifoldId },

    #[error("chart singularity: radius {r:e} is below the chart limit")]
    ChartSingularity { r: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown frame `{0}`")]
    UnknownFrame(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model fingerprint mismatch")]
    Fingerprint,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VfError>;
