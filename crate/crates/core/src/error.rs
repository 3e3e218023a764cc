use thiserror::Error;

/// Errors shared by the whole toolkit. Variant names match the failure modes
/// of the operations that raise them.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported Lévy specification: {0}")]
    UnsupportedSpec(String),
    #[error("invalid simulation grid: {0}")]
    InvalidGrid(String),
    #[error("step budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("query outside the simulated range: {0}")]
    OutOfRange(String),
    #[error("path value must stay positive: {0}")]
    NonPositiveValue(String),
    #[error("horizon too short: {0}")]
    HorizonTooShort(String),
    #[error("empty path")]
    EmptyPath,
    #[error("regularity assumption violated: {0}")]
    RegularityViolation(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("path dead before the requested time: {0}")]
    DeadPath(String),
    #[error("unknown functional id: {0}")]
    UnknownFunctional(String),
    #[error("accumulation diverges: {0}")]
    DivergenceDetected(String),
    #[error("integral does not converge: {0}")]
    NonConvergent(String),
    #[error("ladder height is arithmetic: {0}")]
    ArithmeticLattice(String),
    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
