//! Experiment front end: configuration, persistence, and the CLI verbs.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{RunConfig, UsageError};
