use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. Carries the offending key.
    #[error("invalid config value for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("could not read config file {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config parse error at {path}:{line}: {reason}")]
    ConfigParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// Wavelength fell outside the dispersion model's stated validity range.
    #[error("wavelength {wavelength_um:.4} um outside dispersion validity range {min_um:.3}-{max_um:.3} um")]
    DispersionRange {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    /// Root finding failed to bracket or converge.
    #[error("root finding failed: {0}")]
    RootFind(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Density matrices or amplitude grids defined on different axes.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A time-tag stream was not sorted; carries channel and offending index.
    #[error("unsorted time-tag stream on channel {channel} at index {index}")]
    UnsortedStream { channel: u8, index: usize },

    /// Too few counts to evaluate an estimator (e.g. heralded g2 with no coincidences).
    #[error("insufficient counts: {0}")]
    InsufficientCounts(String),

    #[error("fit did not converge after {iterations} iterations (last residual {residual:.3e})")]
    FitDidNotConverge { iterations: usize, residual: f64 },

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("delay {delay_ps:.2} ps outside precomputed overlap table span ±{span_ps:.2} ps")]
    DelayOutOfTable { delay_ps: f64, span_ps: f64 },

    #[error("background correction produced negative baseline ({baseline:.1} counts)")]
    NegativeBaseline { baseline: f64 },

    #[error("unrecognized file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
