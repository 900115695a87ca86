use num_rational::BigRational;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Definite, degenerate (square discriminant) or otherwise out-of-scope forms.
    #[error("unsupported form: {0}")]
    UnsupportedForm(String),

    /// A closed-form expression that must be a positive integer was not.
    #[error("formula mismatch in {context}: exact value {value}")]
    FormulaMismatch {
        context: String,
        value: BigRational,
    },

    /// `I - A^k` is singular, so the quotient group would have a free part.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedForm(msg.into())
    }
}
