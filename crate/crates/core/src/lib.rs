//! End-to-end neural coreference resolution at desk scale.
//!
//! The pipeline embeds tokens, runs a ReLU feedforward stack, refines token
//! vectors with attention, builds span vectors for mentions, scores every
//! (antecedent, anaphor) pair with a scaled bilinear affinity normalized
//! against a dummy "no antecedent" candidate, and picks at most one
//! antecedent per mention. Training, pruning, int8 quantization, scoring and
//! ablations sit on top of that.

#[cfg(feature = "cli")]
pub mod cli;
pub mod compression;
pub mod config;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod resolver;
pub mod textmodel;
pub mod training;

pub use error::{Error, Result};
pub use model::{ModelConfig, ModelParams};
