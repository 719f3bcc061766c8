//! Monte Carlo experiment harness: scenario configuration, paired policy evaluation, metrics,
//! result files and the `darap` command-line interface.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod output;
pub mod runner;

pub use error::{HarnessError, Result};
