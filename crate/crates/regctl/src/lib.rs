//! Configuration, file formats and experiment drivers for the `regctl`
//! command-line tool. The numerics live in [`regctl_core`].

pub mod config;
pub mod error;
pub mod experiment;
pub mod field_io;

pub use config::{load, parse_config, parse_config_str, RunConfig};
pub use error::{CliError, ConfigError};
