//! Command-line front end for the `tpflow` solvers and verification suites.

pub mod config;
pub mod error;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run, Command, RunReport};
