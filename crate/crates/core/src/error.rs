use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fractional order s = {0} must lie in ({min}, {max})", min = crate::constants::S_MIN, max = 1.0 - crate::constants::S_MIN)]
    InvalidOrder(f64),

    /// A weighted integral over the half-cylinder does not converge.
    #[error("divergent integral: {0}")]
    Domain(String),

    /// Closed-form extension solutions are only available at s = 1/2.
    #[error("operation requires s = 1/2, got s = {0}")]
    UnsupportedOrder(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The flux cannot be put into the equilibrated set: the t-independent
    /// remainder of the time primitive does not cancel against -g.
    #[error("flux is not representable as an equilibrated flux (residual norm {0:e})")]
    NotEquilibrated(f64),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("degenerate basis: scaled Gram condition estimate {0:e}")]
    DegenerateBasis(f64),
}
