//! Experiment orchestration: configuration files, sweep execution, report
//! aggregation, and the verification battery.

pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{example_sweep_config, ExperimentConfig};
pub use experiment::{build_instance, format_float, rows_to_csv, run_experiment, SweepRow};
pub use report::{sweep_report, SweepSummary};
pub use verify::{verify_suite, VerifyReport};
