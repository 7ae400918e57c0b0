//! Configuration, experiment runner and verification suites.

pub mod config;
pub mod report;
pub mod runner;
pub mod suites;

pub use config::{ExperimentConfig, ExperimentKind, Suite, SuiteSizes, Tolerances};
pub use report::{Check, Provenance, StatRow, SuiteReport};
pub use runner::{run_experiment, ExperimentOutput};
pub use suites::run_suite;
