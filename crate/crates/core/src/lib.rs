//! Sequence model, preference-pair trainer and curriculum engine.
//!
//! Numeric code is generic over [`Scalar`] (f32 or f64). Training and
//! sampling run in f32; the f64 instantiation exists for gradient checks.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod curriculum;
pub mod dpo;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod sample;
pub mod scalar;
pub mod sequence;

use thiserror::Error;

pub use adam::{adam_step, OptimizerState};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CheckpointError};
pub use config::ModelConfig;
pub use dpo::{dpo_loss_and_grad, dpo_step, log_ratio, DpoConfig, PreferencePair};
pub use model::{log_probs, nll_loss_and_grad, sequence_log_prob};
pub use params::{clone_params, init_params, Parameters, Tensor};
pub use sample::{greedy_decode, sample, Sample, SampleOptions};
pub use scalar::Scalar;
pub use sequence::TokenSequence;

/// Single-precision parameters used for training and sampling.
pub type Params = Parameters<f32>;
/// Double-precision parameters for finite-difference checks.
pub type Params64 = Parameters<f64>;
pub type Optimizer = OptimizerState<f32>;
pub type Optimizer64 = OptimizerState<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence of {len} tokens exceeds the context length {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} outside a vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("invalid token sequence: {0}")]
    InvalidSequence(String),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("no preference pairs")]
    EmptyPairs,
    #[error("sampling temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
}
