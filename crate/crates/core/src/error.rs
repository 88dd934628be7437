use thiserror::Error;

use crate::beta::BetaSolution;
use crate::continuation::ExtremalResult;
use crate::envelope::EnvelopeSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("right-hand side has mean {mean:e}, exceeding tolerance {tol:e}")]
    MeanNotZero { mean: f64, tol: f64 },

    #[error("form density is not positive (min {min:e})")]
    NotPositive { min: f64 },

    #[error("potential is not admissible: Monge-Ampere density reaches {min:e} at index {index}")]
    NotAdmissible { min: f64, index: usize },

    #[error("{0} is only available for complex dimension {1}")]
    Unsupported(&'static str, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("envelope solver did not converge in {max_iter} iterations")]
    EnvelopeNoConvergence {
        max_iter: usize,
        best: Box<EnvelopeSolution>,
    },

    #[error("beta solver did not converge in {max_newton} Newton steps (residual {residual:e}, beta {beta})")]
    BetaNoConvergence {
        max_newton: usize,
        beta: f64,
        residual: f64,
        best: Box<BetaSolution>,
    },

    #[error("Monge-Ampere damping could not keep the metric positive at beta {beta}")]
    PositivityLoss { beta: f64 },

    #[error("continuation stalled at beta {beta}: two consecutive rungs failed")]
    LadderStalled {
        beta: f64,
        best: Box<ExtremalResult>,
    },

    #[error("monitored bound violated: max {observed:e} exceeds {bound:e}")]
    BoundViolated { observed: f64, bound: f64 },
}

impl Error {
    /// Solver failures are reported separately from input errors by the CLI.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::EnvelopeNoConvergence { .. }
                | Error::BetaNoConvergence { .. }
                | Error::PositivityLoss { .. }
                | Error::LadderStalled { .. }
        )
    }
}
