use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{0} is singular at this point")]
    Singular(&'static str),

    #[error(
        "thinning bound violated on window [{window_start}, {window_end}]: \
         intensity {observed} exceeds bound {bound} at t = {at}"
    )]
    BoundViolation {
        window_start: f64,
        window_end: f64,
        at: f64,
        bound: f64,
        observed: f64,
    },

    #[error("cannot reflect off a zero gradient")]
    ZeroGradient,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("time {t} outside trajectory range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("trajectories come from different configurations: {0}")]
    MixedConfigs(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("corrupt trajectory file: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::Unsupported(_)
            | Error::MixedConfigs(_)
            | Error::TooFew { .. } => 2,
            Error::Io(_) | Error::Corrupt(_) => 4,
            Error::Parse(_) => 2,
            _ => 3,
        }
    }
}
