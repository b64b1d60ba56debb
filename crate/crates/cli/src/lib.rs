//! File formats, configuration and commands of the `tci` tool.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
