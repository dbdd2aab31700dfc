//! Diversity-regularized matrix factorization.
//!
//! A BPR-trained MF model is fine-tuned with a differentiable surrogate of
//! aggregate diversity (coverage plus within-row skewness of the masked
//! top-k softmax), trading a little accuracy for recommendations spread
//! across the whole catalog.
//!
//! Modules:
//! - [`dataio`]: raw parsing, k-core filtering, id remapping, leave-one-out splits
//! - [`mfcore`]: the MF model, BPR loss, Adam, checkpoints
//! - [`divreg`]: softmax, top-k masking, unmasking, the diversity loss
//! - [`metrics`]: top-k lists, nDCG, coverage, entropy, Gini
//! - [`trainer`]: two-phase training and trade-off sweeps
//! - [`config`]: `key=value` run configuration

pub mod config;
pub mod dataio;
pub mod divreg;
pub mod error;
pub mod metrics;
pub mod mfcore;
pub mod trainer;

pub use config::{RunConfig, TrainConfig};
pub use error::{Error, Result};
pub use mfcore::MfModel;
