//! Batch driver for the level-set laboratory: one INI config describes one
//! experiment; the runner executes it and lists every assertion it made.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, Mode};
pub use runner::{run, write_outputs, Command, Report, RunError, RunOptions};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ASSERTION_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SOLVER_FAILED: i32 = 3;
}
