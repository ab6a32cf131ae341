//! File formats, dataset ingestion, benchmarks and command implementations
//! behind the `rfa` binary.

pub mod bench;
pub mod checkpoint;
pub mod commands;
pub mod config;
mod error;
pub mod idx;
pub mod pgm;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{CliError, Result};
