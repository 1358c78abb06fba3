//! Error types shared across the crate.

use std::error::Error;
use std::fmt;
use std::io;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SzoError>;

/// Unified error type for all library operations.
#[derive(Debug)]
pub enum SzoError {
    /// Two vectors (or a vector and a mask) disagree in length.
    DimensionMismatch { expected: usize, got: usize },
    /// An argument is outside its valid domain (non-positive smoothing
    /// parameter, empty split, keep fraction outside (0,1], ...).
    Domain(String),
    /// A computation produced a non-finite value. Carries the parameter
    /// vector at which the failure occurred so callers can checkpoint it.
    NonFinite {
        context: String,
        /// Parameter values at the failure point, if available.
        at: Option<Vec<f64>>,
    },
    /// A file did not conform to its binary or textual format.
    Format(String),
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for SzoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SzoError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            SzoError::Domain(msg) => write!(f, "domain error: {msg}"),
            SzoError::NonFinite { context, .. } => {
                write!(f, "non-finite value encountered in {context}")
            }
            SzoError::Format(msg) => write!(f, "format error: {msg}"),
            SzoError::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl Error for SzoError {
    fn source(&self) -> Option<&(dyn Error + 'static)> {
        match self {
            SzoError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for SzoError {
    fn from(err: io::Error) -> Self {
        SzoError::Io(err)
    }
}

impl SzoError {
    /// Helper for the common "lengths must agree" check.
    pub fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(SzoError::DimensionMismatch { expected, got })
        }
    }
}
