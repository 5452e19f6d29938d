use thiserror::Error;

/// Errors produced by the likelihood solvers, region builders and study runner.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ElError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance is numerically rank deficient")]
    RankDeficient,

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("too few bootstrap replicates converged: {failed} of {total} failed")]
    TooFewReplicates { failed: usize, total: usize },

    #[error("no crossing of the threshold found{}", .angle_index.map(|k| format!(" on ray {k}")).unwrap_or_default())]
    BracketFailure { angle_index: Option<usize> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ElError>;
