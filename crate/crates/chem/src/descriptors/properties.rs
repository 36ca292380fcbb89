use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use crate::smiles::{formula, BondOrder, Element, MolGraph};

/// Physicochemical properties available to multi-parameter objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyVector {
    pub mol_weight: f64,
    pub ring_count: usize,
    pub rotatable_bonds: usize,
    pub tpsa: f64,
    /// Counts of heavy atoms other than carbon.
    pub hetero_counts: BTreeMap<String, usize>,
    pub heavy_atoms: usize,
}

impl PropertyVector {
    /// Share of heavy atoms that are carbon; 0 for a molecule with no heavy atoms.
    pub fn carbon_fraction(&self) -> f64 {
        if self.heavy_atoms == 0 {
            return 0.0;
        }
        let hetero: usize = self.hetero_counts.values().sum();
        (self.heavy_atoms - hetero) as f64 / self.heavy_atoms as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PolarKey {
    element: Element,
    aromatic: bool,
    hydrogens: u8,
    charge: i8,
    single: u8,
    double: u8,
    triple: u8,
    aromatic_bonds: u8,
    three_ring: bool,
}

/// Parses one fragment of the contribution table, e.g. `[NH2+]-*` or `[N]1(-*)-*-*1`.
fn parse_fragment(fragment: &str) -> Option<PolarKey> {
    let close = fragment.find(']')?;
    let inner = fragment.strip_prefix('[')?.get(..close - 1)?;
    let rest = &fragment[close + 1..];
    let mut chars = inner.chars().peekable();
    let first = chars.next()?;
    let aromatic = first.is_ascii_lowercase();
    let element = Element::from_symbol(&first.to_ascii_uppercase().to_string())?;
    let mut hydrogens = 0;
    if chars.peek() == Some(&'H') {
        chars.next();
        hydrogens = match chars.peek().and_then(|c| c.to_digit(10)) {
            Some(d) => {
                chars.next();
                d as u8
            }
            None => 1,
        };
    }
    let charge = match chars.next() {
        None => 0,
        Some('+') => 1,
        Some('-') => -1,
        Some(_) => return None,
    };
    let count = |bond: &str| rest.matches(bond).count() as u8;
    Some(PolarKey {
        element,
        aromatic,
        hydrogens,
        charge,
        single: count("-*"),
        double: count("=*"),
        triple: count("#*"),
        aromatic_bonds: count(":*"),
        three_ring: rest.contains('1'),
    })
}

static TPSA_TABLE: LazyLock<HashMap<PolarKey, f64>> = LazyLock::new(|| {
    let text = include_str!("../../data/tpsa_contributions.tsv");
    let mut table = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (fragment, value) = line.split_once('\t').expect("fragment<TAB>contribution");
        let key = parse_fragment(fragment).unwrap_or_else(|| panic!("bad fragment {fragment:?}"));
        let value: f64 = value.trim().parse().expect("numeric contribution");
        assert!(table.insert(key, value).is_none(), "duplicate fragment {fragment}");
    }
    table
});

/// Topological polar surface area from nitrogen and oxygen contributions.
/// Environments missing from the table contribute nothing.
pub fn tpsa(g: &MolGraph) -> f64 {
    let three_ring = g.in_three_ring();
    let mut contributions = Vec::new();
    for (a, atom) in g.atoms().iter().enumerate() {
        if atom.element != Element::N && atom.element != Element::O {
            continue;
        }
        let mut key = PolarKey {
            element: atom.element,
            aromatic: atom.aromatic,
            hydrogens: g.hydrogen_count(a) as u8,
            charge: atom.charge,
            single: 0,
            double: 0,
            triple: 0,
            aromatic_bonds: 0,
            three_ring: three_ring[a],
        };
        for &(n, b) in g.neighbors(a) {
            if g.atoms()[n].element == Element::H {
                continue;
            }
            match g.bonds()[b].order {
                BondOrder::Single => key.single += 1,
                BondOrder::Double => key.double += 1,
                BondOrder::Triple => key.triple += 1,
                BondOrder::Aromatic => key.aromatic_bonds += 1,
            }
        }
        let value = TPSA_TABLE.get(&key).or_else(|| {
            key.three_ring = false;
            TPSA_TABLE.get(&key)
        });
        contributions.push(value.copied().unwrap_or(0.0));
    }
    // summed in sorted order so the result does not depend on atom order
    contributions.sort_by(f64::total_cmp);
    contributions.iter().sum()
}

pub fn properties(g: &MolGraph) -> PropertyVector {
    let mut hetero_counts = BTreeMap::new();
    let mut heavy_atoms = 0;
    for atom in g.atoms() {
        if atom.element != Element::H {
            heavy_atoms += 1;
            if atom.element != Element::C {
                *hetero_counts.entry(atom.element.symbol().to_string()).or_insert(0) += 1;
            }
        }
    }
    let mol_weight = formula(g).counts.iter().map(|(e, n)| e.mass() * *n as f64).sum();
    let (_, components) = g.components();
    let ring_count = g.bonds().len() + components - g.atom_count();
    let in_ring = g.ring_bonds();
    let rotatable_bonds = g
        .bonds()
        .iter()
        .enumerate()
        .filter(|(i, b)| {
            b.order == BondOrder::Single
                && !in_ring[*i]
                && [b.a, b.b]
                    .iter()
                    .all(|&x| g.atoms()[x].element != Element::H && g.heavy_degree(x) >= 2)
        })
        .count();
    PropertyVector { mol_weight, ring_count, rotatable_bonds, tpsa: tpsa(g), hetero_counts, heavy_atoms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn props(s: &str) -> PropertyVector {
        properties(&parse(s).unwrap())
    }

    #[test]
    fn table_loads_every_row() {
        assert_eq!(TPSA_TABLE.len(), 32);
        let k = parse_fragment("[N]1(-*)-*-*1").unwrap();
        assert_eq!((k.single, k.three_ring), (3, true));
        let k = parse_fragment("[NH3+]-*").unwrap();
        assert_eq!((k.hydrogens, k.charge, k.single), (3, 1, 1));
        let k = parse_fragment("[n](=*)(:*):*").unwrap();
        assert_eq!((k.aromatic, k.double, k.aromatic_bonds), (true, 1, 2));
    }

    #[test]
    fn methane_weight() {
        let p = props("C");
        assert!((p.mol_weight - (12.011 + 4.0 * 1.008)).abs() < 1e-9);
        assert!((p.mol_weight - 16.043).abs() < 1e-3);
        assert_eq!(p.heavy_atoms, 1);
    }

    #[test]
    fn ring_and_rotor_counts() {
        let p = props("C1CC1");
        assert_eq!((p.ring_count, p.rotatable_bonds), (1, 0));
        assert_eq!(props("CCCC").rotatable_bonds, 1);
        assert_eq!(props("CCC").rotatable_bonds, 0);
        assert_eq!(props("c1ccc2ccccc2c1").ring_count, 2);
        assert_eq!(props("c1ccccc1-c1ccccc1").rotatable_bonds, 1);
        assert_eq!(props("CC#CC").rotatable_bonds, 0);
        assert_eq!(props("CC.CC").ring_count, 0);
    }

    #[test]
    fn polar_surface_area() {
        // ethanol: one hydroxyl, 20.23
        assert!((props("CCO").tpsa - 20.23).abs() < 1e-9);
        // acetic acid: carbonyl O + hydroxyl
        assert!((props("CC(=O)O").tpsa - (17.07 + 20.23)).abs() < 1e-9);
        // pyridine n
        assert!((props("c1ccncc1").tpsa - 12.89).abs() < 1e-9);
        // aniline: NH2 on carbon
        assert!((props("Nc1ccccc1").tpsa - 26.02).abs() < 1e-9);
        // pyrrole [nH]
        assert!((props("c1cc[nH]c1").tpsa - 15.79).abs() < 1e-9);
        // aziridine NH in 3-ring
        assert!((props("C1CN1").tpsa - 21.94).abs() < 1e-9);
        // oxirane
        assert!((props("C1CO1").tpsa - 12.53).abs() < 1e-9);
        // acetanilide: amide NH + carbonyl O
        assert!((props("CC(=O)Nc1ccccc1").tpsa - (12.03 + 17.07)).abs() < 1e-9);
        assert_eq!(props("CCCC").tpsa, 0.0);
    }

    #[test]
    fn hetero_counts_and_carbon_fraction() {
        let p = props("CC(=O)Nc1ccccc1");
        assert_eq!(p.hetero_counts.get("N"), Some(&1));
        assert_eq!(p.hetero_counts.get("O"), Some(&1));
        assert_eq!(p.heavy_atoms, 10);
        assert!((p.carbon_fraction() - 0.8).abs() < 1e-12);
        assert_eq!(props("CCCC").carbon_fraction(), 1.0);
    }
}
