use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("payoff ordering {inequality} violated: {detail}")]
    InvalidPayoff {
        inequality: &'static str,
        detail: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside the unit domain: {0}")]
    Domain(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("degenerate eigenvectors: {0}")]
    Degenerate(String),
    #[error("integration failed at t={t}: {reason} (x={x}, r={r})")]
    IntegrationFailure { t: f64, x: f64, r: f64, reason: String },
    #[error("config: {0}")]
    Config(String),
}

/// Coarse grouping used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Config,
    Numeric,
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::InvalidPayoff { .. }
            | Error::InvalidParameter(_)
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Precondition(_)
            | Error::Config(_) => ErrorFamily::Config,
            Error::Singular(_) | Error::Degenerate(_) | Error::IntegrationFailure { .. } => {
                ErrorFamily::Numeric
            }
        }
    }
}
