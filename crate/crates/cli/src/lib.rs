//! Command-line front end: configuration, dataset loading, the analysis
//! pipeline and the file formats it emits.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod kotanchek;
pub mod output;
pub mod report;

pub use commands::{analyze, Stages};
pub use config::AnalysisConfig;
pub use error::{CliError, Result};
pub use report::Report;
