//! Experiment runner for [`upc_core`]: configuration files, CSV/JSON output
//! and multithreaded Monte Carlo. The `upc` binary is a thin front end.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiments;
pub mod parallel;

pub use error::{Result, SimError};
