use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result would overflow or a value left a tabulated/interpolated range.
    #[error("range error: {0}")]
    Range(String),

    /// An iterative method stopped before reaching its tolerance.
    #[error("numeric error: {what} (achieved residual {residual:.3e})")]
    Numeric { what: String, residual: f64 },

    /// A configured size or memory budget was exceeded.
    #[error("resource budget exceeded: {what} (best achieved tolerance {best:.3e})")]
    Resource { what: String, best: f64 },

    /// Inputs are mutually inconsistent (e.g. coefficients built for another a/d).
    #[error("state error: {0}")]
    State(String),

    /// A renormalized low-dimensional coupling hit its pole.
    #[error("confinement-induced resonance at a/d = {critical_a_over_d}")]
    Resonance { critical_a_over_d: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Parse(_) => 2,
            Error::Numeric { .. } => 3,
            Error::Resource { .. } => 4,
            _ => 1,
        }
    }
}
