use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("insufficient degrees of freedom: {observations} observations for {parameters} parameters")]
    DegreesOfFreedom { observations: usize, parameters: usize },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("undecidable: {0}")]
    Undecidable(String),
    #[error("lambda tuning failed: {0}")]
    Tuning(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::SolverFailure(_)
            | Error::NotPositiveDefinite { .. }
            | Error::RankDeficient { .. }
            | Error::Tuning(_) => 2,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
