//! HTTP service and CLI around the toxishield engine.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;

pub use config::ServiceConfig;
pub use pipeline::{AnalysisVerdict, Degraded, Engine, PipelineError, StageOptions, Timings};
