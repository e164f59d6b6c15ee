//! Experiment runner for the `xyqaoa` library: configs, presets, and the
//! CSV/JSON writers behind the `xyqaoa` binary.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{preset, ExperimentConfig, PRESETS};
pub use runner::{cmd_analyze, cmd_gen_instances, cmd_run, Status};
