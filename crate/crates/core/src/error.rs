use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("filter is not stable: a root has modulus {modulus} >= 1")]
    NotStable { modulus: f64 },

    #[error("root finding did not converge for a polynomial of degree {degree}")]
    RootFindingFailure { degree: usize },

    #[error("generator filter is not stable; the prediction-error integral diverges")]
    UnstableGenerator,

    #[error("no proposal accepted after {proposals} draws (lag {lag})")]
    RejectionBudgetExceeded { lag: usize, proposals: u64 },

    #[error("invalid number of clusters {m} for {n} points")]
    InvalidM { m: usize, n: usize },

    #[error("weighted Gram matrix of mode {mode} is singular")]
    SingularSystem { mode: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from malformed user input rather than a numerical failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidM { .. }
                | Error::LengthMismatch { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::RejectionBudgetExceeded { .. }
                | Error::NotStable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
