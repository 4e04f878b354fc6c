//! Configuration loading, experiment orchestration and report files for
//! the `holodof` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{load_config, ConfigError, ExperimentConfig};
pub use experiment::{evaluate, run_experiment, run_sweep, ExitStatus, Outcome, SweepAxis};
pub use report::ComparisonReport;
