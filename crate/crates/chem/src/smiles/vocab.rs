use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::token::{tokenize, Token, TokenKind, BOS_TEXT, EOS_TEXT, PAD_TEXT};
use super::SmilesError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("token id {0} is out of range")]
    UnknownId(u32),
    #[error("vocabulary lists token {0:?} more than once")]
    Duplicate(String),
    #[error("vocabulary is missing special token {0:?}")]
    MissingSpecial(&'static str),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

/// Dense token ids. `<pad>`, `<bos>` and `<eos>` always occupy ids 0, 1 and 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub const PAD: u32 = 0;
    pub const BOS: u32 = 1;
    pub const EOS: u32 = 2;

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        for (id, special) in [(Self::PAD, PAD_TEXT), (Self::BOS, BOS_TEXT), (Self::EOS, EOS_TEXT)] {
            if index.get(special) != Some(&id) {
                return Err(VocabError::MissingSpecial(special));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Specials followed by every distinct token of the corpus in sorted order.
    pub fn from_corpus<'a>(smiles: impl IntoIterator<Item = &'a str>) -> Result<Self, VocabError> {
        let mut seen = BTreeSet::new();
        for s in smiles {
            for tok in tokenize(s)? {
                seen.insert(tok.text);
            }
        }
        let mut tokens: Vec<String> = [PAD_TEXT, BOS_TEXT, EOS_TEXT].iter().map(|s| s.to_string()).collect();
        tokens.extend(seen);
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, text: &str) -> Option<u32> {
        self.index.get(text).copied()
    }

    pub fn inverse_lookup(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token ids for a SMILES string wrapped in `<bos>` ... `<eos>`.
    pub fn encode_smiles(&self, smiles: &str) -> Result<Vec<u32>, VocabError> {
        let toks = tokenize(smiles)?;
        let mut ids = Vec::with_capacity(toks.len() + 2);
        ids.push(Self::BOS);
        for t in toks {
            ids.push(self.lookup(&t.text).ok_or(VocabError::UnknownToken(t.text))?);
        }
        ids.push(Self::EOS);
        Ok(ids)
    }

    /// SMILES text of an id sequence, skipping special tokens.
    pub fn decode_smiles(&self, ids: &[u32]) -> Result<String, VocabError> {
        let mut out = String::new();
        for &id in ids {
            if id == Self::PAD || id == Self::BOS || id == Self::EOS {
                continue;
            }
            out.push_str(self.inverse_lookup(id).ok_or(VocabError::UnknownId(id))?);
        }
        Ok(out)
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        Token::from_text(self.inverse_lookup(id)?)
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.token(id).is_some_and(|t| matches!(t.kind, TokenKind::Bos | TokenKind::Eos | TokenKind::Pad))
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = VocabError;
    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}
