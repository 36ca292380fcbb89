use super::element::Element;
use super::graph::{Atom, Bond, BondOrder};
use super::SmilesError;

/// Hydrogen count an unbracketed atom receives: the smallest allowed valence
/// that covers its bonds, minus the bonds (and minus one for the aromatic pi
/// contribution, which an exocyclic double bond already supplies). `None`
/// when no allowed valence covers the bonds.
pub(crate) fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: u8, has_double: bool) -> Option<u8> {
    let allowed = element.allowed_valences(0)?;
    let v = *allowed.iter().find(|v| **v >= bond_sum)?;
    let pi = u8::from(aromatic && !has_double);
    if aromatic && element == Element::C && bond_sum + pi > v {
        return None;
    }
    Some(v.saturating_sub(bond_sum + pi))
}

pub(crate) fn assign_hydrogens(atoms: &mut [Atom], bracket: &[bool], bonds: &[Bond]) -> Result<(), SmilesError> {
    let mut sums = vec![0u8; atoms.len()];
    let mut doubles = vec![false; atoms.len()];
    for bond in bonds {
        sums[bond.a] = sums[bond.a].saturating_add(bond.order.valence());
        sums[bond.b] = sums[bond.b].saturating_add(bond.order.valence());
        if bond.order == BondOrder::Double {
            doubles[bond.a] = true;
            doubles[bond.b] = true;
        }
    }
    for (idx, atom) in atoms.iter_mut().enumerate() {
        let sum = sums[idx];
        let violation = |valence: u8| SmilesError::ValenceViolation {
            element: atom.element.symbol().to_string(),
            atom: idx,
            valence,
        };
        if bracket[idx] {
            let Some(allowed) = atom.element.allowed_valences(atom.charge as i32) else {
                continue;
            };
            let pi = u8::from(atom.aromatic && atom.element == Element::C && !doubles[idx]);
            let used = sum.saturating_add(atom.explicit_h).saturating_add(pi);
            let max = allowed.iter().copied().max().unwrap_or(0);
            if used > max {
                return Err(violation(used));
            }
        } else {
            match implicit_hydrogens(atom.element, atom.aromatic, sum, doubles[idx]) {
                Some(h) => atom.implicit_h = h,
                None => {
                    let pi = u8::from(atom.aromatic && atom.element == Element::C && !doubles[idx]);
                    return Err(violation(sum + pi));
                }
            }
        }
    }
    Ok(())
}
