use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("aggregate Hessian is singular in coordinate {coord} after {attempts} attempts")]
    DegenerateCoordinate { coord: usize, attempts: usize },

    #[error("could not generate a valid instance after {attempts} attempts: {reason}")]
    Regenerate { attempts: usize, reason: String },

    #[error("subset enumeration of C({n},{s}) exceeds the cap of {cap}")]
    EnumerationCap { n: usize, s: usize, cap: u64 },

    #[error("reference solve stopped at the iteration cap with gradient norm {grad_norm:e}")]
    ReferenceSolve { best_x: Vec<f64>, grad_norm: f64 },

    #[error("local solver hit its oracle cap (client {client}, round {round})")]
    SolverCap { client: usize, round: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverCap { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Trace(_) => 4,
            _ => 2,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
