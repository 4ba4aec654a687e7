use thiserror::Error;

/// Unified error type for the whole analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model configuration (bad JSON, missing keys, wrong shapes).
    #[error("schema error: {0}")]
    Schema(String),

    /// Structurally valid input that violates a semantic requirement
    /// (empty grid axis, ground node outside the box, zero step size).
    #[error("validation error: {0}")]
    Validation(String),

    /// Expression evaluation failure (unknown variable, arity mismatch).
    #[error("expression error: {0}")]
    Eval(String),

    /// Numerical integration produced a non-finite state.
    #[error("integration error: {0}")]
    Integration(String),

    /// Graph-level failures (node index out of range, inconsistent arity).
    #[error("graph error: {0}")]
    Graph(String),

    /// Simulation-level failures (trajectory left the box when it must not).
    #[error("simulation error: {0}")]
    Simulation(String),

    /// Two routes that must agree disagreed. Always a bug, never user error.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
