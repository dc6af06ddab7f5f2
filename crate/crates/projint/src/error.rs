//! Error type shared across the crate.

use std::fmt;

/// Errors produced by system construction, integration, and the benchmark
/// harness.
#[derive(Debug)]
pub enum Error {
    /// A state or parameter vector has the wrong length.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A state contained NaN or infinite entries at construction.
    NonFiniteState { what: &'static str },
    /// The vector field returned a non-finite value at the given RK stage.
    NonFiniteField { stage: usize },
    /// The microsolver produced a non-finite state at the given microstep.
    Divergence { step: u64 },
    /// A macrostep failed; carries the macrostep index and the cause.
    StepFailed { macro_step: u64, source: Box<Error> },
    /// Invalid configuration (tableau, microstep allocation, CLI arguments,
    /// experiment spec, ...).
    Config(String),
    /// A value outside the domain of an operation (e.g. non-positive data
    /// passed to a log-log fit); carries the offending index.
    Domain { index: usize, value: f64 },
    /// A request that would exceed a hard resource guard.
    Infeasible(String),
    /// An oracle failed its build-time step-halving check.
    OracleConvergence { delta: f64, tol: f64 },
    /// I/O failure while emitting results.
    Io(std::io::Error),
    /// JSON (de)serialization failure.
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            Error::NonFiniteState { what } => write!(f, "non-finite entries in {what}"),
            Error::NonFiniteField { stage } => {
                write!(f, "vector field returned a non-finite value at stage {stage}")
            }
            Error::Divergence { step } => {
                write!(f, "microsolver diverged at microstep {step}")
            }
            Error::StepFailed { macro_step, source } => {
                write!(f, "macrostep {macro_step} failed: {source}")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Domain { index, value } => {
                write!(f, "domain error at index {index}: value {value} not admissible")
            }
            Error::Infeasible(msg) => write!(f, "infeasible request: {msg}"),
            Error::OracleConvergence { delta, tol } => write!(
                f,
                "oracle failed step-halving validation: relative change {delta:.3e} exceeds {tol:.1e}"
            ),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::StepFailed { source, .. } => Some(source.as_ref()),
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
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
        Error::Json(e)
    }
}

impl Error {
    /// True if the error chain contains a numerical divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NonFiniteField { .. } => true,
            Error::StepFailed { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
