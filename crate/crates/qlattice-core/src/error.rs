//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate target subsystem index {0}")]
    DuplicateTarget(usize),

    #[error("target subsystem index {index} out of range (system has {count} subsystems)")]
    TargetOutOfRange { index: usize, count: usize },

    #[error("{field} must lie in [0, 1], got {value}")]
    InvalidProbability { field: &'static str, value: f64 },

    #[error("player count {got} outside supported range {min}..={max}")]
    PlayerCount { got: usize, min: usize, max: usize },

    #[error("walker displacement would exceed the dense engine's +/-{t_max} position window")]
    WalkOverflow { t_max: usize },

    #[error("state norm drifted to {norm} (tolerance {tol})")]
    NormDrift { norm: f64, tol: f64 },

    #[error("node ({row}, {col}) outside a {rows}x{cols} grid")]
    NodeOutOfGrid {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("grid {rows}x{cols} too small; both sides must be >= 3")]
    GridTooSmall { rows: usize, cols: usize },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("payoff table: {0}")]
    PayoffTable(String),

    #[error("selftest failed: {0}")]
    SelftestFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
