use std::ops::Deref;

use moldpo_chem::Vocabulary;
use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Token ids of one molecule: `<bos>`, body, `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct TokenSequence(Vec<u32>);

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Result<Self, ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidSequence(msg.to_string()));
        if ids.len() < 2 {
            return bad("needs at least <bos> and <eos>");
        }
        if ids[0] != Vocabulary::BOS || ids[ids.len() - 1] != Vocabulary::EOS {
            return bad("must start with <bos> and end with <eos>");
        }
        let interior = &ids[1..ids.len() - 1];
        if interior.iter().any(|&t| t == Vocabulary::BOS || t == Vocabulary::EOS || t == Vocabulary::PAD) {
            return bad("special token inside the body");
        }
        Ok(TokenSequence(ids))
    }

    pub fn from_smiles(vocab: &Vocabulary, smiles: &str) -> Result<Self, ModelError> {
        let ids = vocab.encode_smiles(smiles).map_err(|e| ModelError::InvalidSequence(e.to_string()))?;
        Self::new(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn into_ids(self) -> Vec<u32> {
        self.0
    }

    /// Body tokens joined back into text.
    pub fn to_smiles(&self, vocab: &Vocabulary) -> String {
        vocab.decode_smiles(&self.0).unwrap_or_default()
    }
}

impl TryFrom<Vec<u32>> for TokenSequence {
    type Error = ModelError;
    fn try_from(ids: Vec<u32>) -> Result<Self, ModelError> {
        Self::new(ids)
    }
}

impl From<TokenSequence> for Vec<u32> {
    fn from(s: TokenSequence) -> Vec<u32> {
        s.0
    }
}

impl AsRef<[u32]> for TokenSequence {
    fn as_ref(&self) -> &[u32] {
        &self.0
    }
}

impl Deref for TokenSequence {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}
