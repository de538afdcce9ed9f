use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates the invariants of the problem it belongs to.
    InvalidParameter { name: &'static str, reason: String },
    /// Field or vector length does not match the grid it is used with.
    ShapeMismatch { expected: usize, found: usize },
    /// An iterative solver hit its iteration cap.
    NotConverged { iterations: usize, residual: f64 },
    /// A value lies outside the range an inverse map is defined on.
    OutOfRange { value: f64, lo: f64, hi: f64 },
    /// An accepted step increased the objective.
    LineSearch { before: f64, after: f64 },
    /// Vector expected to have unit length.
    NonUnit { norm: f64 },
    /// Triangle mesh failed validation.
    InvalidMesh(String),
    /// Two director fields disagree on a boundary node.
    BoundaryMismatch { node: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected} values, found {found}")
            }
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "solver did not converge after {iterations} iterations (last residual {residual:.3e})"
            ),
            Error::OutOfRange { value, lo, hi } => {
                write!(f, "value {value} outside the admissible range [{lo}, {hi}]")
            }
            Error::LineSearch { before, after } => write!(
                f,
                "line search accepted an energy increase ({before:.12e} -> {after:.12e})"
            ),
            Error::NonUnit { norm } => write!(f, "expected a unit vector, got norm {norm}"),
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::BoundaryMismatch { node } => {
                write!(f, "director fields differ on boundary node {node}")
            }
        }
    }
}

impl core::error::Error for Error {}
