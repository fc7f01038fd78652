use alloc::string::String;

/// Errors raised by model construction, tensor computation and recovery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parameter outside its domain: {0}")]
    ParameterDomain(String),
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),
    #[error("size budget exceeded: {0}")]
    Size(String),
    #[error("model generation failed: {0}")]
    Generation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
