use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular matrix (pivot {pivot:.3e} below threshold)")]
    SingularMatrix { pivot: f64 },
    #[error("constant polynomial has no roots")]
    DegreeZero,
    #[error("no convergence after {iterations} iterations (last update {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("order {0} out of range")]
    OrderOutOfRange(usize),
    #[error("duplicate node at index {0}")]
    DuplicateNode(usize),
    #[error("duplicate or zero eps at index {0}")]
    DuplicateEps(usize),
    #[error("invalid history window: {0}")]
    InvalidWindow(&'static str),
    #[error("step does not advance in real time")]
    InvalidStep,
    #[error("singular Jacobian in Newton fallback")]
    SingularJacobian,
    #[error("no root with positive real part for ratios {ratios:?}")]
    NoAdmissibleRoot { ratios: Vec<f64> },
    #[error("degenerate denominator {0:.3e}")]
    DegenerateDenominator(f64),
    #[error("closed form evaluated at a pole")]
    PoleEvaluation,
    #[error("imaginary part of the error term vanishes")]
    DegenerateImaginaryPart,
    #[error("empty stability sector")]
    EmptySector,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("argument outside the domain of W: {0}")]
    DomainError(f64),
    #[error("problem has no exact solution")]
    MissingExactSolution,
    #[error("invalid problem record: {0}")]
    InvalidRecord(String),
}

impl Error {
    /// Failures of the integrator itself, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NoAdmissibleRoot { .. }
                | Error::SingularJacobian
                | Error::SingularMatrix { .. }
                | Error::EmptySector
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
