//! Experiment runner for `emt-core`: JSON configs, seeded repeated runs,
//! per-run CSV traces, aggregate JSON reports and comparison tables.
//!
//! The `emt` binary wraps this library:
//!
//! ```text
//! emt run <config.json> [--out DIR] [--jobs N]
//! emt compare <dir>... [--csv PATH]
//! emt presets list
//! ```

pub mod compare;
pub mod config;
pub mod error;
pub mod presets;
pub mod report;

pub use compare::{compare, Comparison};
pub use config::{ExperimentConfig, ProblemSpec, OUTPUT_ROOT_VAR};
pub use error::{HarnessError, Result};
pub use report::{recompute_tasks, run_experiment, AggregateReport};
