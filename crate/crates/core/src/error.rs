use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("no Dirichlet constraints: the stiffness matrix would be singular")]
    NoConstraints,

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("linear solve failed: relative residual {residual:e} exceeds {tolerance:e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("weight table does not match the time grid: {0}")]
    GridMismatch(String),

    #[error("reference solution check failed: {0}")]
    Reference(String),

    #[error("invalid configuration:\n{0}")]
    Config(#[from] crate::config::ConfigErrors),

    #[error("output error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable lowercase name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Mesh(_) => "mesh",
            Error::NoConstraints => "no_constraints",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::SolverFailure { .. } => "solver_failure",
            Error::Step { source, .. } => source.kind(),
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Reference(_) => "reference",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
