use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit-code taxonomy:
/// `Config` -> 1, `AssumptionViolated` -> 2, `Numeric` -> 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions, overlapping qubit ids, unknown qubit ids.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Arguments outside their documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration files or declarative inputs that do not parse or
    /// reference undefined entities.
    #[error("config error: {0}")]
    Config(String),

    /// A structural network assumption does not hold for the given input.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// Numerical invariants broke down (negative eigenvalues beyond
    /// tolerance, non-physical counts, failed cross-checks).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn assumption(msg: impl Into<String>) -> Self {
        Error::AssumptionViolated(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
