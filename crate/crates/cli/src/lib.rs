//! Command-line laboratory for nearest-neighbor instability experiments.
//!
//! Five subcommands cover the workflow: `bounds` evaluates the closed-form
//! theory for one configuration, `estimate` runs the configured Monte Carlo
//! estimators, `stable-region` measures the volume fraction of stable queries,
//! `sweep` repeats one estimator across an axis, and `check` validates
//! estimates against their bounds (nonzero exit on violation). Every run
//! writes its results next to a manifest recording the configuration digest,
//! seed, stream algorithm, and per-operation timings, so any output can be
//! reproduced bit for bit.

pub mod cli;
pub mod config;
pub mod emit;
pub mod manifest;
pub mod run;

pub use cli::Cli;
pub use config::{parse_config, parse_config_str, ConfigError, ConfigFile, ParsedConfig};
pub use emit::{OutputFormat, ResultRow};
pub use manifest::RunManifest;
pub use run::{execute, Failure, RunRequest, Subcommand};
