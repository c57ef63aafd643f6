//! Experiment harness around the search library: declarative JSON configs,
//! seeded multi-run execution, trajectory CSVs, summary tables and result
//! manifests.

pub mod config;
pub mod experiment;

pub use config::{load_config, validate_config, ConfigError, ExperimentConfig};
pub use experiment::{analyze_dir, run_experiment, CliError, RunOptions};
