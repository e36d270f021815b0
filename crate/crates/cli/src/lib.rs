//! Experiment harness: config parsing, end-to-end runs over a seed list,
//! ablation suites and parameter sweeps, with CSV and JSON reports.

pub mod ablation;
pub mod config;
pub mod error;
pub mod experiment;

pub use ablation::{run_ablation_suite, run_param_sweep, ReportRow};
pub use config::{ExperimentConfig, GraphSource, SweepParam};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentOutcome, Metrics, SeedResult, Summary};
