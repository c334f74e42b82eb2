//! File formats, parallel drivers and the staged command-line pipeline
//! around [`egolayers_core`].

pub mod config;
pub mod formats;
pub mod ingest;
pub mod manifest;
pub mod parallel;
pub mod pipeline;

pub use config::RunConfig;
pub use manifest::Manifest;
pub use pipeline::{run_all, ConfigError, EventSource, Start, StageFailure};
