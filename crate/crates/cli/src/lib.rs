//! Command-line front end: configuration, commands and file writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod units;

pub use cli::Cli;
pub use commands::run;
pub use config::{Resolved, RunConfig};
pub use error::{CliError, Result};
