//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: axis {axis} has empty interval [{lo}, {hi}]")]
    InvalidDomain { axis: usize, lo: f64, hi: f64 },

    #[error("insufficient resolution: axis {axis} has {cells} cells, need at least {min}")]
    Resolution {
        axis: usize,
        cells: usize,
        min: usize,
    },

    #[error("non-finite input: {context}")]
    NonFinite { context: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("time step {dt} violates the stability rule (limit {limit}): {context}")]
    Stability {
        dt: f64,
        limit: f64,
        context: String,
    },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("incompatible operands: {0}")]
    Compatibility(String),

    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    TimeRange { t: f64, lo: f64, hi: f64 },

    #[error("hypothesis not certified: {0}")]
    Hypothesis(String),

    #[error("negative density {value} at step {step} exceeds the positivity budget")]
    PositivityFault { value: f64, step: usize },

    #[error("unknown {kind} name {name:?}; available: {available}")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("arity mismatch: {name:?} is {entry_dim}-dimensional, grid is {grid_dim}-dimensional")]
    ArityMismatch {
        name: String,
        entry_dim: usize,
        grid_dim: usize,
    },

    #[error("catalog entry {name:?} failed load-time verification: {detail}")]
    CatalogVerification { name: String, detail: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation error for key {key:?}: {message}")]
    ConfigValidation { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
