use std::fmt;

use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Atom,
    BracketAtom,
    Bond,
    RingBond,
    BranchOpen,
    BranchClose,
    Dot,
    Bos,
    Eos,
    Pad,
}

/// One grammar unit of a SMILES string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

pub const BOS_TEXT: &str = "<bos>";
pub const EOS_TEXT: &str = "<eos>";
pub const PAD_TEXT: &str = "<pad>";

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token { kind, text: text.into() }
    }

    pub fn bos() -> Self {
        Token::new(TokenKind::Bos, BOS_TEXT)
    }

    pub fn eos() -> Self {
        Token::new(TokenKind::Eos, EOS_TEXT)
    }

    pub fn pad() -> Self {
        Token::new(TokenKind::Pad, PAD_TEXT)
    }

    pub fn is_special(&self) -> bool {
        matches!(self.kind, TokenKind::Bos | TokenKind::Eos | TokenKind::Pad)
    }

    /// Classifies a token text produced by [`tokenize`] (or a special marker).
    pub fn from_text(text: &str) -> Option<Token> {
        let kind = match text {
            BOS_TEXT => TokenKind::Bos,
            EOS_TEXT => TokenKind::Eos,
            PAD_TEXT => TokenKind::Pad,
            _ => {
                let toks = tokenize(text).ok()?;
                if toks.len() != 1 {
                    return None;
                }
                return toks.into_iter().next();
            }
        };
        Some(Token::new(kind, text))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Splits a SMILES string into grammar tokens by greedy longest match.
pub fn tokenize(smiles: &str) -> Result<Vec<Token>, SmilesError> {
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let (kind, len) = match c {
            b'[' => match bytes[i + 1..].iter().position(|&b| b == b']' || b == b'[') {
                Some(off) if bytes[i + 1 + off] == b']' => (TokenKind::BracketAtom, off + 2),
                _ => return Err(SmilesError::UnclosedBracket { pos: i }),
            },
            b'C' if bytes.get(i + 1) == Some(&b'l') => (TokenKind::Atom, 2),
            b'B' if bytes.get(i + 1) == Some(&b'r') => (TokenKind::Atom, 2),
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => (TokenKind::Atom, 1),
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => (TokenKind::Atom, 1),
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => (TokenKind::Bond, 1),
            b'0'..=b'9' => (TokenKind::RingBond, 1),
            b'%' => match (bytes.get(i + 1), bytes.get(i + 2)) {
                (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    (TokenKind::RingBond, 3)
                }
                _ => return Err(SmilesError::IllegalCharacter { ch: '%', pos: i }),
            },
            b'(' => (TokenKind::BranchOpen, 1),
            b')' => (TokenKind::BranchClose, 1),
            b'.' => (TokenKind::Dot, 1),
            _ => {
                let ch = smiles[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(SmilesError::IllegalCharacter { ch, pos: i });
            }
        };
        let text = &smiles[i..i + len];
        if let Some((off, ch)) = text.char_indices().find(|(_, ch)| !ch.is_ascii()) {
            return Err(SmilesError::IllegalCharacter { ch, pos: i + off });
        }
        tokens.push(Token::new(kind, text));
        i += len;
    }
    Ok(tokens)
}

/// Concatenates token texts. Inverse of [`tokenize`].
pub fn detokenize(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect()
}
