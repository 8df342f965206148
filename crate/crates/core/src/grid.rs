//! Uniform time grids on (0, T] and uniform meshes of the unit interval,
//! plus the nesting map used to compare functions across refinement levels.

use crate::error::{Error, Result};

/// Uniform partition of [0, T] into `n_steps` steps of length `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    final_time: f64,
    tau: f64,
}

impl TimeGrid {
    /// Builds a grid with `n_steps >= 1` steps covering [0, `final_time`].
    pub fn new(n_steps: usize, final_time: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "final_time must be positive and finite, got {final_time}"
            )));
        }
        Ok(Self {
            n_steps,
            final_time,
            tau: final_time / n_steps as f64,
        })
    }

    /// Number of steps N.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Step length tau = T / N.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Horizon T.
    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// Grid point t_n. Computed as T * (n / N) so that t_N == T exactly.
    pub fn time(&self, n: usize) -> f64 {
        debug_assert!(n <= self.n_steps);
        self.final_time * (n as f64 / self.n_steps as f64)
    }
}

/// Uniform mesh of (0, 1) with `cells` elements; unknowns sit at the
/// `cells - 1` interior nodes (homogeneous Dirichlet ends).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    cells: usize,
    h: f64,
}

impl Mesh1D {
    /// Builds a mesh with `cells >= 2` so at least one interior node exists.
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidArgument(format!(
                "cells must be at least 2, got {cells}"
            )));
        }
        Ok(Self {
            cells,
            h: 1.0 / cells as f64,
        })
    }

    /// Number of elements M.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Element width h = 1 / M.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of interior nodes M - 1 (the coefficient vector length).
    pub fn n_interior(&self) -> usize {
        self.cells - 1
    }

    /// Coordinate of interior node `i` (0-based), i.e. x = (i + 1) / M.
    pub fn interior_x(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_interior());
        (i + 1) as f64 / self.cells as f64
    }

    /// Coordinate of mesh node `k` including the endpoints, x = k / M.
    pub fn node_x(&self, k: usize) -> f64 {
        debug_assert!(k <= self.cells);
        k as f64 / self.cells as f64
    }
}

/// Integer refinement relation between a coarse and a fine resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestingMap {
    coarse: usize,
    fine: usize,
    ratio: usize,
}

impl NestingMap {
    /// Checks that `fine` is an integer multiple of `coarse` and records the
    /// ratio. Works for both cell counts and step counts.
    pub fn between(coarse: usize, fine: usize) -> Result<Self> {
        if coarse == 0 || fine == 0 || fine % coarse != 0 {
            return Err(Error::NotNested { coarse, fine });
        }
        Ok(Self {
            coarse,
            fine,
            ratio: fine / coarse,
        })
    }

    /// Refinement ratio r = fine / coarse.
    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// Coarse resolution.
    pub fn coarse(&self) -> usize {
        self.coarse
    }

    /// Fine resolution.
    pub fn fine(&self) -> usize {
        self.fine
    }

    /// Fine index aligned with coarse index `i`.
    pub fn fine_index(&self, i: usize) -> usize {
        i * self.ratio
    }
}
