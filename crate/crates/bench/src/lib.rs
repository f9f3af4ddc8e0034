//! Benchmark harness for the circuit-completion library: a registry of
//! named methods and the experiment protocols behind the `circuit-bench`
//! CLI.

pub mod methods;
pub mod sweep;
