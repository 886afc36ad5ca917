use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equilibrium is not a saddle-center")]
    NotASaddle,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("singular differential correction (denominator {denominator:e})")]
    SingularCorrection { denominator: f64 },

    #[error("event `{0}` was not reached")]
    EventNotFound(String),

    #[error("energy {energy} is below the saddle energy {saddle_energy}")]
    EnergyBelowSaddle { energy: f64, saddle_energy: f64 },

    #[error("continuation stalled before bracketing energy {energy} (reached {reached})")]
    EnergyNotBracketed { energy: f64, reached: f64 },

    #[error("fiber {fiber} never reached the section")]
    NoCrossing { fiber: usize },

    #[error("{missing} of {total} fibers missed the section")]
    IncompleteIsland { missing: usize, total: usize },

    #[error("section y = {y_c} at energy {energy} is empty")]
    EmptySection { y_c: f64, energy: f64 },

    #[error("point lies outside the energy boundary (radicand {radicand:e})")]
    OutsideEnergyBoundary { radicand: f64 },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no admissible proposal after {tries} tries")]
    ProposalExhausted { tries: usize },
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::NoConvergence { .. }
                | Error::SingularCorrection { .. }
                | Error::EventNotFound(_)
                | Error::EnergyBelowSaddle { .. }
                | Error::EnergyNotBracketed { .. }
                | Error::NoCrossing { .. }
                | Error::IncompleteIsland { .. }
                | Error::ProposalExhausted { .. }
                | Error::NotASaddle
        )
    }
}
