use thiserror::Error;

/// Errors raised by the valuation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight vector has no positive mass")]
    ZeroMass,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0} is not in the range of the distortion function")]
    OutOfRange(f64),

    #[error("candidate measure puts mass {mass} on scenario {index}, which has zero reference probability")]
    AbsoluteContinuityViolated { index: usize, mass: f64 },

    #[error("posterior update at step {0} lost all mass")]
    DegenerateUpdate(usize),

    #[error("PSOR did not converge at time step {step} after {iterations} iterations")]
    NoConvergence { step: usize, iterations: usize },

    #[error("regression design matrix is singular at step {0}")]
    RegressionSingular(usize),

    #[error("state space too large: {0}")]
    StateSpaceTooLarge(String),

    #[error("outer optimiser used {0} inner evaluations without converging")]
    BudgetExhausted(usize),
}

impl Error {
    /// True for failures of a numerical method, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::RegressionSingular(_)
                | Error::BudgetExhausted(_)
                | Error::DegenerateUpdate(_)
                | Error::StateSpaceTooLarge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
