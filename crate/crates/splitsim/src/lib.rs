//! Experiment harness for `splitsim-core`: TOML experiment plans, dataset
//! files, CSV/JSON metrics, the sweep runner, and a threaded variant of the
//! activation transfer and server phase.

pub mod concurrent;
pub mod config;
pub mod dataset_io;
pub mod metrics;
pub mod report;
pub mod runner;

pub use config::{load_config, parse_config, Cell, ConfigError, DatasetSpec, ExperimentPlan, ModelChoice};
pub use runner::{run_plan, PlanOutcome};
