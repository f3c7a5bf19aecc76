//! File formats, reports and subcommands of the `credal-cal` tool.

pub mod checkpoint;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod svg;
pub mod sweep;

pub use error::{CliError, CliResult};
