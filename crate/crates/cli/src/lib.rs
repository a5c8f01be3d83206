//! JSON file formats and the `resilience` command line.

pub mod commands;
pub mod document;

pub use commands::run;
pub use document::{ModelDocument, SchedulerDocument};
