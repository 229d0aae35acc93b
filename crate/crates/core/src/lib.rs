//! Measurement harness for self-bias in generative-model refinement
//! pipelines: bias and distance-skewness statistics over self/true score
//! pairs, quantile-map calibration, task scorers, refinement state machines,
//! and pluggable text providers.

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod providers;
pub mod report;
pub mod scorers;
pub mod stats;

pub use error::{Error, Result};
