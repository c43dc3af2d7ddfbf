//! Experiment harness for `fracrep-core`: TOML configuration, subcommands
//! writing deterministic outputs and reports, and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
