use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The caller passed data that violates an operation's preconditions.
    InvalidInput(String),
    /// A Sinkhorn denominator fell below the configured floor, which means
    /// `epsilon` is too small for the scale of the cost matrix.
    Underflow {
        /// 1-based Sinkhorn iteration in which the division happened.
        iteration: usize,
        /// The offending denominator.
        value: f64,
    },
    /// A non-finite value appeared while back-propagating.
    NonFinite {
        /// Name of the earliest graph node holding a non-finite gradient.
        node: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Underflow { iteration, value } => write!(
                f,
                "numerical underflow in sinkhorn iteration {iteration}: denominator {value:e} \
                 below floor (epsilon too small for the cost scale)"
            ),
            Error::NonFinite { node } => write!(f, "non-finite gradient at node `{node}`"),
        }
    }
}

impl core::error::Error for Error {}
