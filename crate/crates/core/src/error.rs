use thiserror::Error;

#[derive(Debug, Error)]
pub enum JeekError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("T_v(covariance) of task {task} is singular or ill-conditioned (v = {v})")]
    Singular { task: usize, v: f64 },

    #[error("no threshold in the candidate grid makes every task's T_v(covariance) invertible")]
    NoInvertibleThreshold,

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, JeekError>;
