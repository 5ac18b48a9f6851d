//! Command-line front end for `surfnoise-core`.

pub mod app;
pub mod config;
pub mod error;
pub mod levels;
pub mod output;
pub mod pink;
pub mod spectrum;
pub mod validate;

pub use app::{run, Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
