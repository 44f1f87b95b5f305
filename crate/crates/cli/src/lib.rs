//! Experiment runner for MIMO interference-channel outage analysis and
//! outage-constrained beam design: seeded sweeps, Monte Carlo validation,
//! and CSV artifacts.

pub mod config;
pub mod error;
pub mod rows;
pub mod scenarios;

pub use config::{Designer, ExperimentConfig, KFactorPoint};
pub use error::CliError;
pub use rows::{Check, ResultWriter, Row, RunOutcome};
