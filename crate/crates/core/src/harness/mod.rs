//! Prequential experiment runner and its report files.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Method};
pub use runner::{run_experiment, run_experiment_on, run_trial, ExperimentSummary, MethodSummary, TrialRecord};
