use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("layer index {index} outside {min}..={max}")]
    LayerOutOfRange { index: usize, min: usize, max: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("equivalence requires homogeneous activation, got {0}")]
    NonHomogeneous(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset has no truth values")]
    MissingTruth,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("grid search supports at most 3 parameters, got {0}")]
    TooManyParameters(usize),

    #[error("all {0} restarts diverged")]
    AllRestartsFailed(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad input (config, parse, shape) rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::PowerIteration { .. }
                | Error::AllRestartsFailed(_)
                | Error::NonFinite(_)
                | Error::CheckFailed(_)
        )
    }
}
