//! Config-driven front end for the `tada` binary.

pub mod config;
pub mod runner;

pub use config::{Mode, RunConfig, Scheme};
pub use runner::{dispatch, error_record, exit_code, Outcome};
