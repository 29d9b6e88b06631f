//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Errors surfaced by the estimation laboratory.
#[derive(Debug, Error, Clone)]
pub enum Error {
    /// A structural argument is wrong (non-dyadic grid, level mismatch, bad enum value).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is unusable (NaN samples, empty arrays).
    #[error("input error: {0}")]
    Input(String),

    /// A value lies outside the domain of a link or descriptor.
    #[error("domain error: value {value} {reason}")]
    Domain { value: f64, reason: String },

    /// An integrand is singular or divergent; `location` is the offending abscissa.
    #[error("integrability error at x = {location}: {reason}")]
    Integrability { location: f64, reason: String },

    /// The requested operation exceeds what a descriptor variant supports.
    #[error("capability error: {0}")]
    Capability(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Filesystem failure while exporting results.
    #[error("i/o error: {0}")]
    Io(String),

    /// A descriptor or config string could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
