use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
///
/// Conditions that a scan or validation is expected to report (failed structural
/// checks, non-converged solves, empty scans) are carried in the returned reports
/// instead of this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point ({x}, {y}) lies outside the grid domain")]
    Domain { x: f64, y: f64 },
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("field is not a classical free boundary solution: {0}")]
    NotClassicalSolution(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Domain { .. } => "domain-error",
            Error::IntegrationFailure(_) => "integration-failure",
            Error::NotClassicalSolution(_) => "not-a-classical-solution",
            Error::Parse(_) => "parse-error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
