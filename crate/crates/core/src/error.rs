use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A geometric constraint of a placement scheme is violated.
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    /// Two actuators share a center, so the cross-Gram matrix has two equal columns.
    #[error("singular actuator configuration: {0}")]
    SingularConfiguration(String),

    /// `L² = U_M ⊕ E_M^⊥` does not hold, the oblique projection is undefined.
    #[error("direct sum fails: {0}")]
    DirectSumFailure(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

impl Error {
    /// True for errors caused by the numbers rather than by the configuration.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidArgument(_) | Error::ConstraintViolation(_)
        )
    }
}
