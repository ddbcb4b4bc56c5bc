//! Dataset plumbing around `msa-core`: file formats, manifests, the
//! per-track pipeline, cached hyperparameter sweeps and report emission.

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod sweep;

pub use error::{HarnessError, Result};
