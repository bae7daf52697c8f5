//! Library side of the `capa` command-line tool: configuration loading and
//! the subcommand drivers.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{ConfigFile, Length, Numerics, ScenarioConfig, SweepParameter, SweepSpec};
pub use error::{CliError, Result};
