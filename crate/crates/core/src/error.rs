//! Error type shared by every module.

use num_complex::Complex64;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `s` lies within the pole-detection disk of a Γ-argument.
    #[error("pole of block {block} at s = {location}")]
    Pole { block: usize, location: Complex64 },

    /// No contour keeps the required clearance from the pole sets.
    #[error("no admissible contour: {0}")]
    InfeasibleContour(String),

    /// Quadrature or series truncation could not reach the requested accuracy.
    #[error("tolerance not met: achieved {achieved:e}, requested {requested:e}")]
    ToleranceNotMet { achieved: f64, requested: f64 },

    /// Test-function support must satisfy `0 < a < b`.
    #[error("bad support [{a}, {b}]: need 0 < a < b")]
    BadSupport { a: f64, b: f64 },

    /// Matrix with zero determinant where invertibility is required.
    #[error("singular matrix")]
    Singular,

    /// Shell enumeration did not detect vanishing within the allowed depth.
    #[error("shell depth {depth} exceeded before vanishing was detected")]
    DepthExceeded { depth: i64 },

    /// Coefficient table shorter than the support of the test function.
    #[error("truncation N = {n} is below the support bound {needed}")]
    TruncationTooSmall { n: usize, needed: usize },

    /// Dual-side sum did not settle below the requested tail tolerance.
    #[error("dual-side tail not converged: last block {last:e} at |alpha| = {cutoff}")]
    TailNotConverged { last: f64, cutoff: f64 },

    /// Kernel evaluation needs coefficients beyond the available range.
    #[error("coefficients available up to {available}, need {needed}")]
    CoeffRangeExceeded { available: usize, needed: usize },

    /// The Tate kernel is undefined at s = 1.
    #[error("Tate kernel has a pole at s = 1")]
    PoleAtOne,

    /// Exact integer arithmetic left the supported range.
    #[error("integer overflow while {0}")]
    Overflow(String),

    /// Structurally invalid input (empty grid, bad parity, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
