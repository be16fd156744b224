//! Experiment orchestration behind the `pnd` binary.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

pub use commands::{execute, Command};
pub use config::Config;
pub use experiment::{ExperimentConfig, Mode, RunSettings};
pub use report::{RunReport, SeedMetrics, Stat};
