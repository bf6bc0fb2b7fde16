//! Experiment harness for `sagkit-core`: dataset loading, TOML configs,
//! seeded parallel runs, trajectory and summary files, and named presets.

pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod runner;
pub mod suites;

pub use config::{ExperimentConfig, ResolvedConfig};
pub use error::{HarnessError, Result};
pub use output::{emit_outputs, report, Format, SummaryRow};
pub use runner::{run_experiment, RunRecord, RunStatus};
