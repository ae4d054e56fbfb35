//! Configuration, scenario execution and CSV export for the `halmba`
//! command-line tool.

pub mod config;
pub mod export;
pub mod fmt;
pub mod scenario;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use scenario::{run_scenario, CliError, Command, RunOptions};
