//! File formats, configuration and the command-line driver around
//! [`rhgcn_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

pub use error::{CliError, ExitCode};

/// Artifact version written into every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
