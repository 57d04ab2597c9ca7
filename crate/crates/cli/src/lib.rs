//! Data layer and command drivers behind the `tsvd` binary.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
