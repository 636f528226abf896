//! File formats, checkpoints, plots and the `exprembed` command-line
//! pipeline built on [`exprembed_core`].
//!
//! Every command writes its outputs and a `run-manifest-<command>.json`
//! into the output directory. Exit codes: 0 success, 2 usage error, 3 data
//! or IO error, 4 training divergence.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod scatter;

pub use error::{Error, Result};
