use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature stopped before reaching the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error {achieved:e}, requested {requested:e}")]
    Convergence {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    /// A covariance matrix could not be factorized within the jitter budget.
    #[error("covariance of dimension {dim} is not positive definite: smallest eigenvalue {min_eigenvalue:e} (trace {trace:e})")]
    Indefinite {
        dim: usize,
        min_eigenvalue: f64,
        trace: f64,
    },

    /// An assembled field carried an imaginary part above the real-valuedness threshold.
    #[error("conjugation symmetry violated: imaginary residue {residue:e} exceeds {threshold:e}")]
    SymmetryViolation { residue: f64, threshold: f64 },

    /// Circulant embedding produced a negative eigenvalue beyond round-off.
    #[error("circulant embedding is not nonnegative: eigenvalue {0:e}")]
    Embedding(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
