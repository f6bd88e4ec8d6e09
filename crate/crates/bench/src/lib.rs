//! Experiment runner: configuration, staged execution with artifact reuse,
//! and report emission.

pub mod artifact;
pub mod config;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use pipeline::{run, RunManifest, RunOptions, Stage};
pub use report::{emit_report, Layout, ReportBundle};
