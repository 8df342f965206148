//! Benchmark-only crate; the benches exercise the solver library directly.
