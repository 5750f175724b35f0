use thiserror::Error;

/// Errors raised across the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regressor stack is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("monomial basis too small: target degree {target} exceeds twice the basis degree {basis}")]
    BasisTooSmall { target: u32, basis: u32 },
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("bilinear program: fix either V or (k, lambda)")]
    Bilinearity,
    #[error("solver reported infeasibility (phase-1 margin {margin:e})")]
    SolverInfeasible { margin: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
