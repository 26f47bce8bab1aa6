//! Command-line front end: scenario files, runs with exported artifacts,
//! parameter sweeps, and audits that re-derive every residual from the files.

pub mod closed_form;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;

pub use commands::{audit, run, sweep, AuditOutcome, RunReport, SweepAxis, SweepRow, Timings};
pub use config::{load_scenario, parse_config, to_config_text};
pub use error::{CliError, Result};
