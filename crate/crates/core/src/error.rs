use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("clusters {0:?} and {1:?} are the same cluster")]
    SameCluster((usize, usize), (usize, usize)),
    #[error("coincident points at ({0}, {1}): distance is singular")]
    SingularDistance(f64, f64),
    #[error("non-finite entry in numeric input: {0}")]
    NumericInput(String),
    #[error("precision not reached: achieved {achieved:.3e}, requested {requested:.3e}")]
    Precision { achieved: f64, requested: f64 },
    #[error("outside the validity domain: {0}")]
    Domain(String),
    #[error("out of scope: {0}")]
    OutOfScope(String),
    #[error("plan infeasible at level {level}: {reason}")]
    PlanInfeasible { level: usize, reason: String },
    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precision { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
