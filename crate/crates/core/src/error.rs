use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: ({n_left}, {d_left}) vs ({n_right}, {d_right})")]
    GridMismatch {
        n_left: usize,
        d_left: usize,
        n_right: usize,
        d_right: usize,
    },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A computation would exceed a configured resource budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("degenerate block scheme: p + q = {span} exceeds n = {n}")]
    DegenerateScheme { n: usize, span: usize },

    #[error("orbit too short: need {needed} steps, got {got}")]
    OrbitTooShort { needed: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("functional is not 1-Lipschitz (constant {0})")]
    NotLipschitz(f64),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
