//! Command-line front end of the echo canceller: WAV I/O, layered
//! configuration and the `process`, `simulate`, `evaluate` and `bench`
//! workflows.

pub mod commands;
pub mod error;
pub mod settings;
pub mod wav;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult, ExitKind};
