//! Scenario files, the built-in catalog, parameter sweeps and artifact
//! writers behind the `metasim` binary.

pub mod catalog;
pub mod error;
pub mod run;
pub mod scenario;
pub mod svg;
pub mod sweep;

pub use error::{CliError, Result};
