//! SMILES tokenization, parsing, validation and canonicalization.

mod canon;
mod element;
mod formula;
mod graph;
mod parse;
mod token;
mod valence;
mod vocab;

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub use canon::{canonical_ranks, canonicalize};
pub use element::Element;
pub use formula::{formula, FormulaError, MolFormula};
pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use parse::{parse, parse_tokens};
pub use token::{detokenize, tokenize, Token, TokenKind, BOS_TEXT, EOS_TEXT, PAD_TEXT};
pub use vocab::{VocabError, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty input")]
    EmptyInput,
    #[error("illegal character {ch:?} at byte {pos}")]
    IllegalCharacter { ch: char, pos: usize },
    #[error("unterminated bracket atom starting at byte {pos}")]
    UnclosedBracket { pos: usize },
    #[error("malformed bracket atom {text}")]
    MalformedBracketAtom { text: String },
    #[error("unmatched parenthesis at token {pos}")]
    UnmatchedParenthesis { pos: usize },
    #[error("ring bond {label} is never closed")]
    UnmatchedRingBond { label: u16 },
    #[error("unexpected token {text:?} at position {pos}")]
    UnexpectedToken { pos: usize, text: String },
    #[error("invalid bond: {reason}")]
    InvalidBond { reason: String },
    #[error("valence violation on {element} atom {atom}: valence {valence}")]
    ValenceViolation { element: String, atom: usize, valence: u8 },
}

/// Outcome of [`validate`]; failures are reported, never raised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub diagnostic: Option<SmilesError>,
}

pub fn validate(smiles: &str) -> Validation {
    match parse(smiles) {
        Ok(_) => Validation { valid: true, diagnostic: None },
        Err(e) => Validation { valid: false, diagnostic: Some(e) },
    }
}

/// Canonical SMILES of a string, if it parses.
pub fn canonical_smiles(smiles: &str) -> Result<String, SmilesError> {
    parse(smiles).map(|g| canonicalize(&g))
}

/// Reads a corpus file: one SMILES per line, `#` comments and blank lines skipped.
pub fn read_corpus(path: impl AsRef<Path>) -> io::Result<Vec<String>> {
    Ok(parse_corpus(&fs::read_to_string(path)?))
}

pub fn parse_corpus(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
