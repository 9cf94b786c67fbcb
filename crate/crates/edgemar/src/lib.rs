//! Experiment harness around `edgemar-core`: JSON/CSV file formats, the
//! config-driven pipeline runner, parameter sweeps, wall-clock reports and
//! the command-line front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;
pub mod sweep;
pub mod timing;

pub use config::Config;
pub use error::AppError;
