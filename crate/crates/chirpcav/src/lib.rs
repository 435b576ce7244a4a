//! Configuration, file formats and the command line for `chirpcav-core`.

pub mod commands;
pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, Parsed, RunConfig};
