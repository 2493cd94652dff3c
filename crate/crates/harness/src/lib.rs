//! Experiment harness for the `ecx` command-line tool.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod metrics;
