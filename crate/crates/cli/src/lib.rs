//! Study driver behind the `subdiffopt` binary: canonical example problems,
//! config parsing, convergence-study execution, and CSV emission.

pub mod cases;
pub mod config;
pub mod emit;
pub mod study;
