//! Crate-wide error type.

use std::fmt;

/// Everything that can go wrong across the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter outside its admissible range (negative radius, κ ≤ 0, ...).
    Domain(String),
    /// Two profiles have different cell counts and resampling was not requested.
    SizeMismatch { left: usize, right: usize },
    /// Two objects live in different spatial dimensions.
    DimensionMismatch { left: u32, right: u32 },
    /// Consecutive quantiles coincide: the implied density has an atom.
    Atom { index: usize },
    /// An input density does not carry unit mass.
    BadMass { mass: f64 },
    /// The support constraint q_M ≤ r is violated.
    SupportViolation { q_last: f64, radius: f64 },
    /// An entropy integrand failed a validity check.
    InvalidIntegrand(String),
    /// The inner minimization stalled above the requested tolerance.
    OptimizerStall { residual: f64, iterations: usize },
    /// Time-step underflow or a stability failure in the PDE solver.
    Unstable(String),
    /// A requested time lies outside the trajectory, or too close to its ends.
    TimeOutOfRange { t: f64 },
    /// Filesystem or parsing failure.
    Io(String),
    /// An invalid run configuration.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::SizeMismatch { left, right } => {
                write!(f, "profile size mismatch: {left} vs {right} cells")
            }
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: n={left} vs n={right}")
            }
            Error::Atom { index } => {
                write!(f, "coincident quantiles at cell {index}: density has an atom")
            }
            Error::BadMass { mass } => write!(f, "density mass {mass} differs from 1"),
            Error::SupportViolation { q_last, radius } => {
                write!(f, "support constraint violated: q_M={q_last} > r={radius}")
            }
            Error::InvalidIntegrand(msg) => write!(f, "invalid integrand: {msg}"),
            Error::OptimizerStall { residual, iterations } => {
                write!(f, "optimizer stalled at residual {residual} after {iterations} iterations")
            }
            Error::Unstable(msg) => write!(f, "solver instability: {msg}"),
            Error::TimeOutOfRange { t } => write!(f, "time {t} outside trajectory"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
