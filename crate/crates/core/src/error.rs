use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    InvalidInput(String),
    /// Two inputs that must agree in shape do not.
    DimensionMismatch(String),
    /// A restricted Gram matrix is singular (or numerically so) where the
    /// operation requires invertibility.
    SingularGram { min_eigenvalue: f64 },
    /// A design matrix column is identically zero and cannot be standardized.
    ZeroColumn { column: usize },
    /// An iterative routine exhausted its iteration budget.
    NotConverged(String),
    /// The penalty-budget bisection could not bracket the target.
    BracketFailed { lo_penalty: f64, hi_penalty: f64, target: f64 },
    /// A coefficient vector handed to a certification routine is not optimal.
    NotOptimal { max_residual: f64, tol: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::SingularGram { min_eigenvalue } => {
                write!(f, "restricted Gram matrix is singular (min eigenvalue {min_eigenvalue:e})")
            }
            Error::ZeroColumn { column } => {
                write!(f, "column {column} is identically zero and cannot be standardized")
            }
            Error::NotConverged(msg) => write!(f, "did not converge: {msg}"),
            Error::BracketFailed { lo_penalty, hi_penalty, target } => write!(
                f,
                "could not bracket penalty budget {target}: achieved range [{hi_penalty}, {lo_penalty}]"
            ),
            Error::NotOptimal { max_residual, tol } => write!(
                f,
                "coefficients are not optimal: KKT residual {max_residual:e} exceeds tolerance {tol:e}"
            ),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
