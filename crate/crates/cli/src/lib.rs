//! Training and evaluation pipeline for the robotic guide.
//!
//! The library side of the `guidetrain` binary: configuration, the pipeline
//! stages, and report rendering. See the crate README for the CLI surface
//! and the artifact layout.

pub mod config;
pub mod report;
pub mod stages;
pub mod svg;

pub use config::Config;
pub use stages::{Artifacts, PipelineError};
