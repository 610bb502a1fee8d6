//! Batch front end: configuration files, experiment dispatch and run records.

// Validation is written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod run;

pub use config::{load, parse_cases, ConfigError, Diagnostic, ExperimentConfig, Kind};
pub use experiments::{execute, Check, Outcome, StageError};
pub use run::{config_hash, run, validate_all, CaseRecord, RunRecord};
