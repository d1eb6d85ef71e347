//! Command-line front end for the mulched-soil thermal model.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
