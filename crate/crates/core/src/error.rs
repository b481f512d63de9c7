use thiserror::Error;

/// Errors raised by model construction, simulation and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state is not normalized: squared norm {norm_sq} differs from 1 by more than {tol}")]
    NotNormalized { norm_sq: f64, tol: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise path kind does not match the model: {0}")]
    NoiseMismatch(String),

    #[error("time {t} lies beyond the collapse time {collapse_time}")]
    BeyondCollapse { t: f64, collapse_time: f64 },

    #[error("level {0} has zero initial probability")]
    ZeroProbabilityLevel(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
