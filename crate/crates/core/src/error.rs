use alloc::string::String;

/// Errors produced by the recognition toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Textual input could not be parsed.
    #[error("format error: {0}")]
    Format(String),
    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The label sequence cannot be aligned to the available timesteps.
    #[error("infeasible CTC instance: {labels} labels with {repeats} adjacent repeats need more than {timesteps} timesteps")]
    Infeasible {
        labels: usize,
        repeats: usize,
        timesteps: usize,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
