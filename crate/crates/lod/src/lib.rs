//! File formats, experiment orchestration, and the command-line front end for
//! [`lod_core`].

pub mod cache;
pub mod coeff_file;
pub mod config;
mod error;
pub mod experiment;
pub mod fs;
pub mod report;

pub use error::{Error, Result};
