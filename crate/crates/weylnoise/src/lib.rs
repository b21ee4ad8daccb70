//! Configuration-driven experiments on randomly perturbed semiclassical
//! operators: runner, persistence, plots and replay.

pub mod config;
pub mod record;
pub mod replay;
pub mod runner;
pub mod svg;

pub use config::{ConfigError, Experiment, ExperimentConfig, GuardReport};
pub use record::{emit_outputs, Manifest, MetricRow, OutputError, ResultRow, RunRecord, SummaryRow};
pub use replay::{replay, Mismatch, ReplayError, ReplayReport};
pub use runner::{run_experiment, RunError};
