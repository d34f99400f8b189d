//! Pipeline orchestration for the `claimpref` command.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod records;
pub mod remote;
