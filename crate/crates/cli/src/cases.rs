//! The two canonical example problems used by the convergence studies.
//!
//! Example A: zero source, smooth target t -> e^t x (1 - x); the box stays
//! inactive, so control and adjoint errors coincide up to the sign/gamma map.
//! Example B: piecewise source (1 + cos t) on x > 1/2 with target scaled by
//! five; the upper bound becomes active.

use subdiffopt::{Bounds, Error, Result};

/// Which example problem to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleCase {
    /// Zero source, inactive box.
    A,
    /// Discontinuous source, active upper bound.
    B,
}

impl ExampleCase {
    /// Parses the CLI label.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(ExampleCase::A),
            "b" => Ok(ExampleCase::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown example '{other}', expected 'a' or 'b'"
            ))),
        }
    }

    /// Lowercase label used in file names.
    pub fn label(self) -> &'static str {
        match self {
            ExampleCase::A => "a",
            ExampleCase::B => "b",
        }
    }

    /// Fixed source term f(x, t).
    pub fn source(self) -> fn(f64, f64) -> f64 {
        match self {
            ExampleCase::A => |_x, _t| 0.0,
            ExampleCase::B => |x, t| if x > 0.5 { 1.0 + t.cos() } else { 0.0 },
        }
    }

    /// Desired state u_d(x, t).
    pub fn target(self) -> fn(f64, f64) -> f64 {
        match self {
            ExampleCase::A => |x, t| t.exp() * x * (1.0 - x),
            ExampleCase::B => |x, t| 5.0 * t.exp() * x * (1.0 - x),
        }
    }

    /// Default admissible band shared by both examples.
    pub fn default_bounds() -> Bounds {
        Bounds {
            lower: 0.0,
            upper: 0.05,
        }
    }
}
