use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::element::Element;
use super::graph::MolGraph;

/// Element counts, hydrogens included.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MolFormula {
    pub counts: BTreeMap<Element, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed formula {text:?}: {reason}")]
pub struct FormulaError {
    pub text: String,
    pub reason: String,
}

impl MolFormula {
    pub fn count(&self, element: Element) -> u32 {
        self.counts.get(&element).copied().unwrap_or(0)
    }

    /// Parses element-count text such as `C9H10N2O2PF2Cl`.
    pub fn parse(text: &str) -> Result<MolFormula, FormulaError> {
        let err = |reason: &str| FormulaError { text: text.to_string(), reason: reason.to_string() };
        let b = text.as_bytes();
        if b.is_empty() {
            return Err(err("empty formula"));
        }
        let mut counts = BTreeMap::new();
        let mut i = 0;
        while i < b.len() {
            if !b[i].is_ascii_uppercase() {
                return Err(err("expected an element symbol"));
            }
            let mut end = i + 1;
            if end < b.len() && b[end].is_ascii_lowercase() {
                end += 1;
            }
            let element = Element::from_symbol(&text[i..end]).ok_or_else(|| err("unknown element"))?;
            i = end;
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let n: u32 = if start == i {
                1
            } else {
                text[start..i].parse().map_err(|_| err("count out of range"))?
            };
            if n == 0 {
                return Err(err("zero count"));
            }
            if counts.insert(element, n).is_some() {
                return Err(err("element repeated"));
            }
        }
        Ok(MolFormula { counts })
    }
}

/// Hill order: C, H, then the rest alphabetically (alphabetical throughout without carbon).
impl fmt::Display for MolFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<(Element, u32)> = self.counts.iter().map(|(e, n)| (*e, *n)).collect();
        let has_carbon = self.counts.contains_key(&Element::C);
        entries.sort_by_key(|(e, _)| {
            let bucket = match (*e, has_carbon) {
                (Element::C, true) => 0,
                (Element::H, true) => 1,
                _ => 2,
            };
            (bucket, e.symbol())
        });
        for (e, n) in entries {
            if n == 1 {
                write!(f, "{e}")?;
            } else {
                write!(f, "{e}{n}")?;
            }
        }
        Ok(())
    }
}

pub fn formula(g: &MolGraph) -> MolFormula {
    let mut counts = BTreeMap::new();
    let mut hydrogens = 0u32;
    for atom in g.atoms() {
        *counts.entry(atom.element).or_insert(0) += 1;
        hydrogens += atom.total_h() as u32;
    }
    if hydrogens > 0 {
        *counts.entry(Element::H).or_insert(0) += hydrogens;
    }
    MolFormula { counts }
}
