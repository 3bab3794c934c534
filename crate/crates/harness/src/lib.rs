//! Experiment harness: configuration, seeded orchestration, CSV and plot
//! output, and preset reproductions.

pub mod cli;
pub mod config;
pub mod plots;
pub mod presets;
pub mod runner;
