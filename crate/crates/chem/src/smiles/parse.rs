use std::collections::HashMap;

use super::element::Element;
use super::graph::{Atom, Bond, BondOrder, MolGraph};
use super::token::{tokenize, Token, TokenKind};
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Unspecified,
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondSymbol {
    fn from_text(text: &str) -> BondSymbol {
        match text {
            "-" => BondSymbol::Single,
            "=" => BondSymbol::Double,
            "#" => BondSymbol::Triple,
            ":" => BondSymbol::Aromatic,
            // directional bonds only carry stereo, which the graph ignores
            _ => BondSymbol::Unspecified,
        }
    }
}

/// What the grammar allows next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    /// start of input or after `.`
    Atom,
    /// after `(`
    AtomOrBond,
    /// after a bond symbol
    AtomOrRing,
    /// after an atom, ring bond or `)`
    Any,
}

struct Builder {
    atoms: Vec<Atom>,
    bracket: Vec<bool>,
    bonds: Vec<Bond>,
}

impl Builder {
    fn add_bond(&mut self, a: usize, b: usize, symbol: BondSymbol) -> Result<(), SmilesError> {
        if a == b {
            return Err(SmilesError::InvalidBond { reason: format!("atom {a} bonded to itself") });
        }
        if self
            .bonds
            .iter()
            .any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
        {
            return Err(SmilesError::InvalidBond { reason: format!("second bond between atoms {a} and {b}") });
        }
        let both_aromatic = self.atoms[a].aromatic && self.atoms[b].aromatic;
        let order = match symbol {
            BondSymbol::Unspecified if both_aromatic => BondOrder::Aromatic,
            BondSymbol::Unspecified | BondSymbol::Single => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic if both_aromatic => BondOrder::Aromatic,
            BondSymbol::Aromatic => {
                return Err(SmilesError::InvalidBond {
                    reason: format!("aromatic bond between atoms {a} and {b} needs two aromatic atoms"),
                })
            }
        };
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }
}

/// Parses a SMILES string into a validated molecular graph.
pub fn parse(smiles: &str) -> Result<MolGraph, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let tokens = tokenize(smiles)?;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[Token]) -> Result<MolGraph, SmilesError> {
    if tokens.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let mut builder = Builder { atoms: Vec::new(), bracket: Vec::new(), bonds: Vec::new() };
    let mut prev: Option<usize> = None;
    let mut pending = BondSymbol::Unspecified;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: HashMap<u16, (usize, BondSymbol)> = HashMap::new();
    let mut expect = Expect::Atom;

    for (pos, token) in tokens.iter().enumerate() {
        let unexpected = || SmilesError::UnexpectedToken { pos, text: token.text.clone() };
        match token.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let (atom, is_bracket) = if token.kind == TokenKind::Atom {
                    (organic_atom(&token.text), false)
                } else {
                    (bracket_atom(&token.text)?, true)
                };
                builder.atoms.push(atom);
                builder.bracket.push(is_bracket);
                let idx = builder.atoms.len() - 1;
                if let Some(p) = prev {
                    builder.add_bond(p, idx, pending)?;
                }
                pending = BondSymbol::Unspecified;
                prev = Some(idx);
                expect = Expect::Any;
            }
            TokenKind::Bond => {
                if !matches!(expect, Expect::Any | Expect::AtomOrBond) {
                    return Err(unexpected());
                }
                pending = BondSymbol::from_text(&token.text);
                expect = Expect::AtomOrRing;
            }
            TokenKind::RingBond => {
                if !matches!(expect, Expect::Any | Expect::AtomOrRing) {
                    return Err(unexpected());
                }
                let atom = prev.ok_or_else(unexpected)?;
                let label: u16 = token.text.trim_start_matches('%').parse().map_err(|_| unexpected())?;
                match rings.remove(&label) {
                    Some((open_atom, open_symbol)) => {
                        let symbol = match (open_symbol, pending) {
                            (BondSymbol::Unspecified, s) | (s, BondSymbol::Unspecified) => s,
                            (a, b) if a == b => a,
                            _ => {
                                return Err(SmilesError::InvalidBond {
                                    reason: format!("ring bond {label} has conflicting bond symbols"),
                                })
                            }
                        };
                        builder.add_bond(open_atom, atom, symbol)?;
                    }
                    None => {
                        rings.insert(label, (atom, pending));
                    }
                }
                pending = BondSymbol::Unspecified;
                expect = Expect::Any;
            }
            TokenKind::BranchOpen => {
                if expect != Expect::Any {
                    return Err(unexpected());
                }
                branches.push((prev.ok_or_else(unexpected)?, pos));
                expect = Expect::AtomOrBond;
            }
            TokenKind::BranchClose => {
                if expect != Expect::Any {
                    return Err(unexpected());
                }
                let (atom, _) = branches.pop().ok_or(SmilesError::UnmatchedParenthesis { pos })?;
                prev = Some(atom);
            }
            TokenKind::Dot => {
                if expect != Expect::Any || !branches.is_empty() {
                    return Err(unexpected());
                }
                prev = None;
                expect = Expect::Atom;
            }
            TokenKind::Bos | TokenKind::Eos | TokenKind::Pad => return Err(unexpected()),
        }
    }
    if let Some(&(_, pos)) = branches.first() {
        return Err(SmilesError::UnmatchedParenthesis { pos });
    }
    if let Some(label) = rings.keys().min() {
        return Err(SmilesError::UnmatchedRingBond { label: *label });
    }
    if expect != Expect::Any {
        return Err(SmilesError::UnexpectedToken { pos: tokens.len(), text: String::new() });
    }
    let Builder { mut atoms, bracket, bonds } = builder;
    super::valence::assign_hydrogens(&mut atoms, &bracket, &bonds)?;
    Ok(MolGraph::from_parts(atoms, bonds))
}

fn organic_atom(text: &str) -> Atom {
    let aromatic = text.chars().next().is_some_and(|c| c.is_ascii_lowercase());
    let symbol = if aromatic { text.to_ascii_uppercase() } else { text.to_string() };
    let element = Element::from_symbol(&symbol).expect("tokenizer only emits organic-subset atoms");
    Atom { element, charge: 0, aromatic, explicit_h: 0, implicit_h: 0, isotope: None }
}

/// `[` isotope? symbol chirality? hcount? charge? class? `]`
fn bracket_atom(text: &str) -> Result<Atom, SmilesError> {
    let malformed = || SmilesError::MalformedBracketAtom { text: text.to_string() };
    let inner = text
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(malformed)?;
    let b = inner.as_bytes();
    let mut i = 0;

    let digits = |i: &mut usize| -> Option<u32> {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i == start {
            None
        } else {
            inner[start..*i].parse().ok()
        }
    };

    let isotope = match digits(&mut i) {
        Some(v) if v <= 999 => Some(v as u16),
        Some(_) => return Err(malformed()),
        None => None,
    };

    let rest = &inner[i..];
    let (element, aromatic, len) = if let Some(sym) = ["se", "as", "te"].iter().find(|s| rest.starts_with(**s)) {
        (Element::from_symbol(&capitalize(sym)).ok_or_else(malformed)?, true, 2)
    } else if let Some(c) = rest.chars().next().filter(|c| "bcnops".contains(*c)) {
        (Element::from_symbol(&c.to_ascii_uppercase().to_string()).ok_or_else(malformed)?, true, 1)
    } else if rest.starts_with(|c: char| c.is_ascii_uppercase()) {
        let two = rest.get(..2).filter(|s| s.as_bytes()[1].is_ascii_lowercase());
        match two.and_then(Element::from_symbol) {
            Some(e) => (e, false, 2),
            None => (Element::from_symbol(&rest[..1]).ok_or_else(malformed)?, false, 1),
        }
    } else {
        return Err(malformed());
    };
    if aromatic && !element.can_be_aromatic() {
        return Err(malformed());
    }
    i += len;

    if b.get(i) == Some(&b'@') {
        i += 1;
        if b.get(i) == Some(&b'@') {
            i += 1;
        }
    }

    let mut explicit_h = 0u8;
    if b.get(i) == Some(&b'H') {
        i += 1;
        explicit_h = 1;
        if let Some(d) = b.get(i).filter(|d| d.is_ascii_digit()) {
            explicit_h = d - b'0';
            i += 1;
        }
    }

    let mut charge: i32 = 0;
    if let Some(&sign_byte) = b.get(i).filter(|c| **c == b'+' || **c == b'-') {
        let sign = if sign_byte == b'+' { 1 } else { -1 };
        i += 1;
        if let Some(n) = digits(&mut i) {
            if n > 15 {
                return Err(malformed());
            }
            charge = sign * n as i32;
        } else {
            charge = sign;
            while b.get(i) == Some(&sign_byte) {
                charge += sign;
                i += 1;
            }
            if charge.abs() > 15 {
                return Err(malformed());
            }
        }
    }

    if b.get(i) == Some(&b':') {
        i += 1;
        digits(&mut i).ok_or_else(malformed)?;
    }
    if i != b.len() {
        return Err(malformed());
    }
    Ok(Atom { element, charge: charge as i8, aromatic, explicit_h, implicit_h: 0, isotope })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}
