use thiserror::Error;

pub type Result<T> = std::result::Result<T, DomiError>;

#[derive(Debug, Error)]
pub enum DomiError {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("kernel is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error(
        "rank deficient: requested {requested} items but only {rank} usable eigenvalues/gains"
    )]
    RankDeficient { requested: usize, rank: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigendecomposition did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
