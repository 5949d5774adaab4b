//! Configuration, simulation studies, and output formats behind the
//! `assort` command-line tool. The heavy lifting lives in `assort-core`;
//! this crate adds the JSON config surface, Monte Carlo experiment drivers
//! with pinned seeding, and the CSV writers.

pub mod config;
pub mod error;
pub mod experiments;

pub use error::{CliError, CliResult};
