use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Shape of the decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    #[serde(default = "default_context")]
    pub context_length: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_context() -> usize {
    128
}
fn default_layers() -> usize {
    4
}
fn default_heads() -> usize {
    4
}
fn default_embed() -> usize {
    128
}

impl ModelConfig {
    /// Desk-scale default shape for a given vocabulary.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            context_length: default_context(),
            layers: default_layers(),
            heads: default_heads(),
            embed_dim: default_embed(),
            seed: 0,
        }
    }

    pub fn tiny(vocab_size: usize, seed: u64) -> Self {
        ModelConfig { vocab_size, context_length: 16, layers: 2, heads: 2, embed_dim: 16, seed }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.vocab_size < 4 {
            return bad(format!("vocab_size {} leaves no room beyond the special tokens", self.vocab_size));
        }
        if self.layers == 0 || self.heads == 0 || self.embed_dim == 0 {
            return bad("layers, heads and embed_dim must be positive".into());
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return bad(format!("embed_dim {} is not divisible by heads {}", self.embed_dim, self.heads));
        }
        if self.context_length < 3 {
            return bad(format!("context_length {} cannot hold <bos> x <eos>", self.context_length));
        }
        Ok(())
    }
}
