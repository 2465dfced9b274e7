//! Benchmark harness for the phase-optimization toolkit: declarative
//! experiment specs, deterministic parallel sweeps, stable CSV/JSON output,
//! independent oracles, and the verification suites built on them.

pub mod config;
pub mod emit;
pub mod experiment;
pub mod oracles;
pub mod suites;
