//! Experiment plumbing around `ofm-core`: configuration files, the
//! end-to-end clustering pipeline, the streaming harness, result emission,
//! and the verification suite the `ofm verify` subcommand runs.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod suite;

pub use config::{CliError, ExperimentConfig, GraphSource, StreamConfig};
pub use pipeline::{run_pipeline, run_streaming, ClusteringRun};
