//! Configuration, file formats and command implementations for the `fictop` CLI.

pub mod app;
pub mod config;
pub mod exec;
pub mod import;
pub mod output;
pub mod vtk;

pub use config::{parse_config, Config, ConfigError, LoadedConfig};
