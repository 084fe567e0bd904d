//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("singular denominator at node {node} in {context}")]
    Singularity { node: usize, context: &'static str },

    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearSolve {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("eigenpair iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    EigenSolve { iterations: usize, residual: f64 },

    #[error("envelope {name} violated at node {node}: {lhs:.6e} vs {rhs:.6e}")]
    EnvelopeViolation {
        name: &'static str,
        node: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("rectangle ordering violated at node {node}")]
    RectangleOrder { node: usize },

    #[error("certificate still failing after {doublings} doublings of the constants")]
    ConstantsExhausted { doublings: u32 },

    #[error("continuation schedule is empty")]
    EmptySchedule,

    #[error("schedule values must be strictly decreasing within (0,1)")]
    BadSchedule,

    #[error("degree domain inadmissible: boundary sample margin {margin:.3e} below tolerance")]
    Inadmissible { margin: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
