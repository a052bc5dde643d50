//! Batch front-end for `rcm-oze`: configuration, subcommands and the
//! validation suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod validate;

pub use config::RunConfig;
pub use error::CliError;
