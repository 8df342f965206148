//! Solver library for box-constrained tracking control of a subdiffusion
//! equation on the unit interval: piecewise-linear finite elements in space,
//! fractional-order time stepping (two interchangeable weight schemes), and
//! a damped projected fixed-point iteration coupling the state and adjoint
//! equations. A small brute-force module cross-checks the fast paths.

mod conv;
pub mod error;
pub mod fem1d;
pub mod fracweights;
pub mod grid;
pub mod ocp;
pub mod subdiff;
pub mod verify;

pub use error::{Error, Result};
pub use fem1d::{
    assemble_mass, assemble_stiffness, l2_diff, l2_diff_nested, l2_norm, l2_project, prolong,
    thomas_solve, NodalFn, TriDiag, TriFactor,
};
pub use fracweights::{
    cq_weights, frac_deriv_adjoint, frac_deriv_forward, l1_weights, FracWeights, Scheme,
};
pub use grid::{Mesh1D, NestingMap, TimeGrid};
pub use ocp::{
    clamp_project, discrete_inner, discrete_norm, kkt_residual, objective, solve_ocp, Bounds,
    OcpProblem, OcpSolution,
};
pub use subdiff::{
    factor_system, solve_adjoint, solve_forward, SourceKind, SourceSpec, SystemFactor, Trajectory,
};
pub use verify::{
    backward_euler_heat, l2_error_vs_function, manufactured_t2, qp_objective, qp_oracle,
    ManufacturedCase,
};
