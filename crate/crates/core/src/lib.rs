//! Aggregation-free federated learning in the DCT frequency domain.
//!
//! Clients distill their local shards into small synthetic sets, optimize
//! them against frequency-domain feature statistics, and transmit only the
//! top-left window of each image's DCT spectrum. The server zero-pads,
//! inverse-transforms and trains a global model on the union.

pub mod commands;
pub mod datasets;
pub mod distill;
pub mod error;
pub mod federation;
pub mod frequency;
pub mod manifest;
pub mod nn;
pub mod tensor;
pub mod wire;

pub use error::{Error, Result};
pub use tensor::Tensor;
