//! Pipeline around `samia-core`: dataset ingestion, candidate generation
//! against HTTP/cache/mock backends, batch scoring, and report emission.
//!
//! The binary in `main.rs` is a thin wrapper over [`cli::run`]; everything
//! else lives here so integration tests can drive the stages directly.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod errors;
pub mod loglikes;
pub mod output;
pub mod sampler;
pub mod scoring;
