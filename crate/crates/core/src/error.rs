use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("index {index} out of range (0..{len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("singular covariance in conditional for group {0}")]
    SingularCovariance(usize),
    #[error("degenerate Monte Carlo estimate: {0}")]
    DegenerateEstimate(String),
    #[error("chain holds no stored draws")]
    EmptyChain,
    #[error("maximum iterations ({0}) exceeded")]
    MaxIterationsExceeded(usize),
    #[error("design is rank deficient")]
    RankDeficient,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient replications: need at least {needed}, got {got}")]
    InsufficientReplications { needed: usize, got: usize },
    #[error("unknown example {0}; expected 1..=5")]
    UnknownExample(usize),
    #[error("rate undefined: {0}")]
    UndefinedRate(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: usize },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NonFiniteInput(_)
                | Error::IndexOutOfRange { .. }
                | Error::InvalidParameter(_)
                | Error::InvalidConfig(_)
                | Error::Parse { .. }
                | Error::MissingValue { .. }
                | Error::Io(_)
                | Error::UnknownExample(_)
                | Error::InsufficientData(_)
                | Error::InsufficientReplications { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
