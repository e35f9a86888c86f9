use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the regime an operation is defined on (beyond the
    /// injectivity radius, invalid loop parameters, τ ∉ (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("maximum iterations ({iterations}) reached with gradient norm {grad_norm:.3e}")]
    MaxIterations { iterations: usize, grad_norm: f64 },

    #[error("configuration left the domain Σd² < ρ²")]
    BoundaryEscape,

    #[error("unclassifiable critical point: {0}")]
    UnclassifiableCritical(String),

    #[error("inconclusive scan: {0}")]
    InconclusiveScan(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Numeric failures (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Error::Domain(_) | Error::Config(_))
    }
}
