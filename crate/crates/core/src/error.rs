//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors reported by grid construction, assembly, and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two grids were expected to be nested but the fine resolution is not an
    /// integer multiple of the coarse one.
    #[error("grids are not nested: {fine} is not an integer refinement of {coarse}")]
    NotNested {
        /// Coarse resolution (cell or step count).
        coarse: usize,
        /// Fine resolution (cell or step count).
        fine: usize,
    },

    /// A vector length does not match the grid it is paired with.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch {
        /// Length required by the grid.
        expected: usize,
        /// Length actually supplied.
        got: usize,
    },

    /// Elimination hit a pivot too small to divide by.
    #[error("factorization failed: near-zero pivot in row {row}")]
    SingularPivot {
        /// Row at which elimination broke down.
        row: usize,
    },

    /// A user-supplied coefficient function returned NaN or infinity.
    #[error("source evaluation returned a non-finite value at x = {x}, t = {t}")]
    NonFinite {
        /// Spatial coordinate of the failing evaluation.
        x: f64,
        /// Time coordinate of the failing evaluation.
        t: f64,
    },

    /// The fixed-point iteration ran out of iterations.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        /// Iterations performed before giving up.
        iterations: usize,
        /// Residual at the last iterate.
        residual: f64,
    },

    /// A brute-force routine was asked for a problem larger than it supports.
    #[error("problem size {got} exceeds the supported limit {limit}")]
    SizeLimit {
        /// Requested size.
        got: usize,
        /// Largest supported size.
        limit: usize,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
