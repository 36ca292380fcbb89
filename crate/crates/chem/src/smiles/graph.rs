use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence. Aromatic bonds count one; the shared
    /// pi electron is accounted for separately by the valence rules.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens inferred from the valence table for organic-subset atoms.
    pub implicit_h: u8,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn total_h(&self) -> u8 {
        self.explicit_h + self.implicit_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Parsed molecular structure. Hydrogens are carried as counts on their heavy
/// atom unless the SMILES wrote them as `[H]` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// per atom: (neighbour, bond index)
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        MolGraph { atoms, bonds, adjacency }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    /// Neighbours that are not hydrogen atoms.
    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element != Element::H)
            .count()
    }

    /// Hydrogens on the atom: counted ones plus bonded `[H]` atoms.
    pub fn hydrogen_count(&self, atom: usize) -> usize {
        let attached = self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].element == Element::H)
            .count();
        self.atoms[atom].total_h() as usize + attached
    }

    pub fn bond_valence_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|(_, b)| self.bonds[*b].order.valence())
            .sum()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, i)| &self.bonds[*i])
    }

    /// Connected component label per atom, and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(a) = stack.pop() {
                for &(n, _) in &self.adjacency[a] {
                    if label[n] == usize::MAX {
                        label[n] = count;
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Per bond: whether it lies on a cycle (is not a bridge).
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut in_ring = vec![true; self.bonds.len()];
        let mut timer = 0;
        // iterative Tarjan bridge finding; frame = (atom, parent bond, next adjacency slot)
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, usize::MAX, 0));
            while let Some(frame) = stack.last_mut() {
                let (a, parent_bond, slot) = *frame;
                if slot < self.adjacency[a].len() {
                    frame.2 += 1;
                    let (nb, bond) = self.adjacency[a][slot];
                    if bond == parent_bond {
                        continue;
                    }
                    if disc[nb] == usize::MAX {
                        disc[nb] = timer;
                        low[nb] = timer;
                        timer += 1;
                        stack.push((nb, bond, 0));
                    } else {
                        low[a] = low[a].min(disc[nb]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[a]);
                        if low[a] > disc[p] {
                            in_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }

    /// Per atom: whether it belongs to a three-membered ring.
    pub fn in_three_ring(&self) -> Vec<bool> {
        let mut flags = vec![false; self.atoms.len()];
        for bond in &self.bonds {
            for &(c, _) in &self.adjacency[bond.a] {
                if c != bond.b && self.bond_between(c, bond.b).is_some() {
                    flags[bond.a] = true;
                    flags[bond.b] = true;
                    flags[c] = true;
                }
            }
        }
        flags
    }

    /// Relabels atoms: atom `i` of `self` becomes atom `perm[i]` of the result.
    /// Bond list order is shuffled along with the labels it references.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length mismatch");
        let mut atoms = vec![None; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = Some(atom.clone());
        }
        let atoms: Vec<Atom> = atoms.into_iter().map(|a| a.expect("perm is not a bijection")).collect();
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond { a: perm[b.b], b: perm[b.a], order: b.order })
            .collect();
        bonds.sort_by_key(|b| (b.a.min(b.b), b.a.max(b.b)));
        MolGraph::from_parts(atoms, bonds)
    }
}
