//! Experiment driver: config parsing, stage sweeps and report output.

pub mod commands;
pub mod config;
pub mod report;
pub mod stages;
