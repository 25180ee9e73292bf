//! Experiment runner for the `pricemfg-core` solver: presets, TOML configs,
//! CSV/JSON artifacts and the `compare` tool.

pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use compare::{compare_files, Discrepancy};
pub use config::{Overrides, Preset, RunConfig};
pub use error::{CliError, Result};
pub use run::{run, solve, Experiment, Report, RunOutput};
