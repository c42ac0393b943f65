//! File formats, configuration, parallel execution and the experiment
//! runner behind the `sfedca` binary.

pub mod config;
pub mod csvdata;
pub mod idx;
pub mod output;
pub mod parallel;
pub mod runner;

pub use config::{parse_config, ExperimentConfig};
pub use runner::{run, RunError};
