use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmurfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A variance left its admissible range or a state became non-finite.
    #[error("numeric abort: {0}")]
    NumericAbort(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T, E = SmurfError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> SmurfError {
    SmurfError::InvalidArgument(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SmurfError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
