use thiserror::Error;

/// Errors produced by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("mesh quality: {0}")]
    MeshQuality(String),

    #[error("field does not belong to this mesh (expected {expected} values, got {got})")]
    MeshMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Newton iteration failed to converge. Along a ray this is the operational
    /// signal that no solution exists at the requested parameter.
    #[error("no convergence after {iterations} Newton iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("accuracy: {0}")]
    Accuracy(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
