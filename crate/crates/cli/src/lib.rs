//! Experiment harness: configuration, multi-instance runs, resource sweeps,
//! timing benchmarks and shadow-file utilities behind the `also` binary.

pub mod bench;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;
