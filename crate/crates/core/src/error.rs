use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gas state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "root finder failed: {what} (bracket [{lo:e}, {hi:e}], f(lo)={f_lo:e}, f(hi)={f_hi:e})"
    )]
    RootFinding {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("degenerate moments: rho={rho:e}, theta={theta:e}")]
    DegenerateMoments { rho: f64, theta: f64 },

    #[error("shape mismatch: expected {expected} nodes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("input is not microscopic: macroscopic part has relative size {0:e}")]
    NotMicroscopic(f64),

    #[error(
        "iterative solve stalled after {iterations} iterations (relative residual {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("states outside the regime of the weighted norm: {0}")]
    OutOfRegime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CFL condition violated: dt={dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("solver blow-up at t={t:e}, cell {cell}: rho={rho:e}, theta={theta:e}")]
    BlowUp {
        t: f64,
        cell: usize,
        rho: f64,
        theta: f64,
    },

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
