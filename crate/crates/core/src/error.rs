use thiserror::Error;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite state encountered at step {step}")]
    NonFiniteState { step: usize },

    #[error("overflow in {context}")]
    Overflow { context: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("root finder reached its iteration cap (best iterate {best})")]
    IterationCap { best: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
