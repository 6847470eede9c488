use thiserror::Error;

/// Errors raised by the recovery library and the harness.
#[derive(Debug, Error)]
pub enum MmvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl MmvError {
    /// Process exit code used by the `mmv` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            MmvError::InvalidArgument(_) | MmvError::SizeLimit(_) | MmvError::Parse(_) => 2,
            MmvError::Degenerate(_) | MmvError::Infeasible(_) => 3,
            MmvError::Io(_) | MmvError::Csv(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, MmvError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MmvError::InvalidArgument(msg.into()))
}
