use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Weight near the top of the retained basis exceeds the truncation tolerance.
    #[error("truncation guard failed at cutoff {cutoff}: tail mass {tail_mass:.3e} exceeds {tolerance:.1e}")]
    TailGuard {
        cutoff: usize,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("operation produced the zero vector: {0}")]
    ZeroVector(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("angle sets of the two contours differ")]
    AngleMismatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
