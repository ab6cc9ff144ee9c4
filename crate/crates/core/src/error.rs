//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A configuration was paired with an instance of a different spin count.
    SpinCountMismatch { expected: usize, got: usize },
    /// A spin index at or beyond the instance size.
    SpinIndexOutOfRange { index: usize, n: usize },
    /// Structurally invalid instance data (bad coupling indices, values, ...).
    InvalidInstance(String),
    /// An argument outside its documented domain.
    InvalidParameter(String),
    /// Full enumeration refused because 2^n exceeds the configured cap.
    EnumerationTooLarge { n: usize, cap: usize },
    /// Rejection sampling hit its attempt budget without an acceptable draw.
    GenerationExhausted { attempts: u64 },
    /// A trial found no configuration inside the locking band.
    EmptyLockedSet,
    /// `trial_plan` with a success probability of zero: no finite budget works.
    UnboundedTrialPlan,
    /// A fit was requested on data that cannot support one.
    DegenerateFit(String),
    Io(std::io::Error),
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SpinCountMismatch { expected, got } => {
                write!(f, "spin count mismatch: instance has {expected}, got {got}")
            }
            Error::SpinIndexOutOfRange { index, n } => {
                write!(f, "spin index {index} out of range for n = {n}")
            }
            Error::InvalidInstance(msg) => write!(f, "invalid instance: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::EnumerationTooLarge { n, cap } => {
                write!(f, "refusing to enumerate 2^{n} configurations (cap n <= {cap})")
            }
            Error::GenerationExhausted { attempts } => {
                write!(f, "no acceptable instance after {attempts} attempts")
            }
            Error::EmptyLockedSet => write!(f, "locking band contains no configurations"),
            Error::UnboundedTrialPlan => {
                write!(f, "success probability is zero: no trial budget reaches the target")
            }
            Error::DegenerateFit(msg) => write!(f, "degenerate fit: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
