//! Experiment harness for the `regcls-core` lab: trial specs and results,
//! λ search, grid configuration and planning, resumable result storage,
//! summary tables and plot exports.
//!
//! Results live in a directory chosen by `--results` or the
//! [`RESULTS_DIR_ENV`] environment variable.

pub mod config;
pub mod error;
pub mod export;
pub mod grid;
pub mod metrics;
pub mod search;
pub mod store;
pub mod summary;
pub mod trial;

pub use config::GridConfig;
pub use error::{HarnessError, Result};
pub use grid::{run_grid, run_specs, GridReport};
pub use summary::{summarize_dir, Summary};
pub use trial::{run_trial, TrialResult, TrialSpec};

/// Environment variable naming the results directory.
pub const RESULTS_DIR_ENV: &str = "REGCLS_RESULTS_DIR";
