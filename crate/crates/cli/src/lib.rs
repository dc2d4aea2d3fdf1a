//! Experiment runner for `choiforge`: parameter sweeps that write CSV, and
//! one-off solve/verify/transform commands that write JSON.

pub mod app;
pub mod args;
pub mod commands;
pub mod error;
pub mod range;
pub mod sweep;

pub use app::run;
pub use args::Cli;
pub use error::{exit, CliError, Result};
