//! Command-line front end for `pint-core`: single solves, benchmark tables
//! and the verification suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::CliError;
