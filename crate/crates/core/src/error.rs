use thiserror::Error;

/// Errors raised by the solvers and model constructors.
///
/// Each variant maps to one error kind in the machine-readable error
/// records written by the command-line front end (see [`Error::kind`]).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A parameter violates a stated bound (dimension, exponent, grid size, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested multiplier is at or below the first Dirichlet eigenvalue
    /// threshold, where no positive solution exists.
    #[error("no positive solution expected below -lambda_1: lambda = {lambda}, -lambda_1 = {threshold}")]
    BelowFirstEigenvalue { lambda: f64, threshold: f64 },

    /// A precondition on a numeric argument does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// Root bracketing, bisection or an iteration failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The shooting map a -> first-zero radius is not monotone: more than one
    /// candidate height was found.
    #[error("ambiguous shooting problem: {} candidate brackets for u(0)", brackets.len())]
    Ambiguity { brackets: Vec<(f64, f64)> },

    /// The nonlinearity produced a non-finite value.
    #[error("evaluation error at r = {r}, u = {u}: {what}")]
    Evaluation { r: f64, u: f64, what: String },

    /// The integrator ran out of steps or the step size underflowed.
    #[error("integration error: {reason} (last reliable radius {last_r})")]
    Integration { last_r: f64, reason: String },

    /// Malformed or unknown configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case identifier used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::BelowFirstEigenvalue { .. } => "below_first_eigenvalue",
            Error::Domain(_) => "domain",
            Error::Numeric(_) => "numeric",
            Error::Ambiguity { .. } => "ambiguity",
            Error::Evaluation { .. } => "evaluation",
            Error::Integration { .. } => "integration",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
