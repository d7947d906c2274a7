//! Batch front-end: configuration, pipelines and their output files.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{OracleConfig, Pipeline, RunConfig, SweepConfig, SweepParameter, Tolerances};
pub use pipeline::{run, CliError, Outcome, Status};
