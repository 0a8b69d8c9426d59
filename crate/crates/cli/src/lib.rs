//! Experiment harness around the `unhinged` library: configurable sweeps,
//! dynamics runs, axiom reports and randomized checks, written as CSV/JSON
//! with optional SVG plots.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod svg;

pub use commands::{run, EXIT_CLAIM_FAILED, EXIT_INVALID_INPUT, EXIT_OK};
