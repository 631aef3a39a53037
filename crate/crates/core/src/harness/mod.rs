//! Experiment runner behind the command-line interface.

mod config;
mod report;
mod run;

pub use config::{BlackBox, ExperimentConfig, Method, ReportFormat, KEYS};
pub use report::{emit_report, write_report, Aggregate};
pub use run::{
    ingest_csv, run_experiment, ExperimentResult, RepetitionFailure, RepetitionReport, WscMetadata,
};
