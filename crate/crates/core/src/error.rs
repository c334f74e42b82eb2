use alloc::string::String;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value {value} outside the support of the {family} family")]
    Domain { family: &'static str, value: f64 },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("not applicable: {0}")]
    Inapplicable(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
