use alloc::boxed::Box;
use alloc::string::String;

use crate::linalg::SolveReport;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inconsistent mesh levels, coefficient resolution, or run parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("CG did not converge: {} iterations, relative residual {:.3e}", .0.iterations, .0.relative_residual)]
    NotConverged(SolveReport),

    #[error("singular or indefinite matrix: {0}")]
    Singular(String),

    #[error("rank-deficient constraints on patch of element {element}")]
    RankDeficient { element: usize },

    #[error("corrector problem for coarse element {element} failed: {cause}")]
    Corrector { element: usize, cause: Box<Error> },

    #[error("time step {step} failed: {cause}")]
    Step { step: usize, cause: Box<Error> },

    #[error("nonlinearity produced a non-finite value at step {step}")]
    BlowUp { step: usize },
}

impl Error {
    pub(crate) fn at_element(self, element: usize) -> Self {
        match self {
            Error::RankDeficient { .. } => Error::RankDeficient { element },
            other => Error::Corrector {
                element,
                cause: Box::new(other),
            },
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            cause: Box::new(self),
        }
    }
}
