use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: degree {degree} needs at least {} basis functions, got {basis_count}", 2 * degree + 1)]
    KnotVector { degree: usize, basis_count: usize },

    #[error("point {value} outside the parameter domain [0, 1]")]
    OutOfDomain { value: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("non-positive weight {value} at basis function {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("singular or inverted Jacobian (det = {det:e}) at {point:?}")]
    SingularJacobian { point: Vec<f64>, det: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("geometry format error on line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("unknown geometry `{0}`")]
    UnknownGeometry(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NotPositiveDefinite
                | Error::NoConvergence { .. }
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
