use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected ({expected_n}, {expected_m}), got ({got_n}, {got_m})")]
    DimensionMismatch {
        expected_n: usize,
        expected_m: usize,
        got_n: usize,
        got_m: usize,
    },
    #[error("invalid rank: {0}")]
    InvalidRank(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("eigenvalue solver did not converge")]
    ConvergenceFailure,
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("trajectory has too few states")]
    EmptyTrajectory,
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("run diverged where convergence was requested: {0}")]
    DivergenceOnly(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the `mmhb` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AssumptionViolated(_) | Error::PreconditionViolated(_) => 3,
            Error::DivergenceOnly(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
