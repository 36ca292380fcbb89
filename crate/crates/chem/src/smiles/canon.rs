use std::fmt::Write;

use super::graph::{Bond, BondOrder, MolGraph};
use super::valence::implicit_hydrogens;

fn dense_rank<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            r += 1;
        }
        ranks[order[w]] = r;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

/// Morgan-style refinement: repeatedly split classes by the multiset of
/// (neighbour class, bond order) until the partition stops changing.
fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.atom_count())
            .map(|a| {
                let mut env: Vec<(usize, u8)> = g
                    .neighbors(a)
                    .iter()
                    .map(|&(n, b)| (ranks[n], g.bonds()[b].order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[a], env)
            })
            .collect();
        let next = dense_rank(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

fn initial_ranks(g: &MolGraph) -> Vec<usize> {
    let invariants: Vec<_> = (0..g.atom_count())
        .map(|a| {
            let atom = &g.atoms()[a];
            (
                atom.element.atomic_number(),
                atom.isotope.unwrap_or(0),
                atom.charge,
                g.degree(a),
                atom.total_h(),
                atom.aromatic,
            )
        })
        .collect();
    refine(g, dense_rank(&invariants))
}

/// Lowest tied class and its members, if any ties remain.
fn first_tie(ranks: &[usize]) -> Option<(usize, Vec<usize>)> {
    let mut seen = vec![0usize; ranks.len()];
    for &r in ranks {
        seen[r] += 1;
    }
    let tied = (0..seen.len()).find(|r| seen[*r] > 1)?;
    Some((tied, (0..ranks.len()).filter(|&i| ranks[i] == tied).collect()))
}

fn split_at(g: &MolGraph, ranks: &[usize], tied: usize, chosen: usize) -> Vec<usize> {
    let split: Vec<usize> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| 2 * r + usize::from(r == tied && i != chosen))
        .collect();
    refine(g, dense_rank(&split))
}

fn break_ties(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    while let Some((tied, members)) = first_tie(&ranks) {
        ranks = split_at(g, &ranks, tied, members[0]);
    }
    ranks
}

/// Atom ranks that depend only on the labelled graph, all distinct.
/// Ties left by refinement are broken one atom at a time.
pub fn canonical_ranks(g: &MolGraph) -> Vec<usize> {
    break_ties(g, initial_ranks(g))
}

struct Emitter<'g> {
    g: &'g MolGraph,
    ranks: Vec<usize>,
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    ring_opens: Vec<Vec<usize>>,
    ring_closes: Vec<Vec<usize>>,
    ring_seen: Vec<bool>,
    ring_digit: Vec<Option<u8>>,
    digits_in_use: [bool; 100],
}

impl<'g> Emitter<'g> {
    fn sorted_neighbors(&self, a: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.g.neighbors(a).to_vec();
        nbrs.sort_by(|x, y| self.ranks[y.0].cmp(&self.ranks[x.0]));
        nbrs
    }

    fn build_tree(&mut self, a: usize, parent_bond: Option<usize>) {
        self.visited[a] = true;
        for (n, bond) in self.sorted_neighbors(a) {
            if Some(bond) == parent_bond {
                continue;
            }
            if self.visited[n] {
                if !self.ring_seen[bond] {
                    self.ring_seen[bond] = true;
                    self.ring_opens[n].push(bond);
                    self.ring_closes[a].push(bond);
                }
            } else {
                self.children[a].push((n, bond));
                self.build_tree(n, Some(bond));
            }
        }
    }

    fn bond_text(&self, bond: usize) -> &'static str {
        let b = &self.g.bonds()[bond];
        match b.order {
            BondOrder::Single if self.g.atoms()[b.a].aromatic && self.g.atoms()[b.b].aromatic => "-",
            BondOrder::Single | BondOrder::Aromatic => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }

    fn atom_text(&self, a: usize, out: &mut String) {
        let atom = &self.g.atoms()[a];
        let symbol = atom.element.symbol();
        let bare = atom.element.in_organic_subset()
            && atom.charge == 0
            && atom.isotope.is_none()
            && implicit_hydrogens(
                atom.element,
                atom.aromatic,
                self.g.bond_valence_sum(a),
                self.g.neighbors(a).iter().any(|&(_, b)| self.g.bonds()[b].order == BondOrder::Double),
            ) == Some(atom.total_h());
        let symbol = if atom.aromatic { symbol.to_ascii_lowercase() } else { symbol.to_string() };
        if bare {
            out.push_str(&symbol);
            return;
        }
        out.push('[');
        if let Some(iso) = atom.isotope {
            let _ = write!(out, "{iso}");
        }
        out.push_str(&symbol);
        match atom.total_h() {
            0 => {}
            1 => out.push('H'),
            h => {
                let _ = write!(out, "H{h}");
            }
        }
        match atom.charge {
            0 => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            c if c > 0 => {
                let _ = write!(out, "+{c}");
            }
            c => {
                let _ = write!(out, "-{}", -c);
            }
        }
        out.push(']');
    }

    fn write_digit(out: &mut String, d: u8) {
        if d < 10 {
            let _ = write!(out, "{d}");
        } else {
            let _ = write!(out, "%{d}");
        }
    }

    fn emit(&mut self, a: usize, out: &mut String) {
        self.atom_text(a, out);
        for bond in self.ring_closes[a].clone() {
            let d = self.ring_digit[bond].take().expect("ring opened before it closes");
            self.digits_in_use[d as usize] = false;
            Self::write_digit(out, d);
        }
        for bond in self.ring_opens[a].clone() {
            let d = (1..100u8).find(|d| !self.digits_in_use[*d as usize]).expect("fewer than 100 open rings");
            self.digits_in_use[d as usize] = true;
            self.ring_digit[bond] = Some(d);
            out.push_str(self.bond_text(bond));
            Self::write_digit(out, d);
        }
        let children = self.children[a].clone();
        for (i, &(child, bond)) in children.iter().enumerate() {
            let branch = i + 1 < children.len();
            if branch {
                out.push('(');
            }
            out.push_str(self.bond_text(bond));
            self.emit(child, out);
            if branch {
                out.push(')');
            }
        }
    }
}

fn spell(g: &MolGraph, ranks: Vec<usize>) -> String {
    let n = g.atom_count();
    let mut emitter = Emitter {
        g,
        ranks,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        ring_opens: vec![Vec::new(); n],
        ring_closes: vec![Vec::new(); n],
        ring_seen: vec![false; g.bonds().len()],
        ring_digit: vec![None; g.bonds().len()],
        digits_in_use: [false; 100],
    };
    let start = (0..n).max_by_key(|&a| emitter.ranks[a]).expect("component is non-empty");
    emitter.build_tree(start, None);
    let mut out = String::new();
    emitter.emit(start, &mut out);
    out
}

fn component_subgraph(g: &MolGraph, labels: &[usize], c: usize) -> MolGraph {
    let members: Vec<usize> = (0..g.atom_count()).filter(|&a| labels[a] == c).collect();
    let mut local = vec![usize::MAX; g.atom_count()];
    for (i, &a) in members.iter().enumerate() {
        local[a] = i;
    }
    let atoms = members.iter().map(|&a| g.atoms()[a].clone()).collect();
    let bonds = g
        .bonds()
        .iter()
        .filter(|b| labels[b.a] == c)
        .map(|b| Bond { a: local[b.a], b: local[b.b], order: b.order })
        .collect();
    MolGraph::from_parts(atoms, bonds)
}

fn canonicalize_component(g: &MolGraph) -> String {
    let ranks = initial_ranks(g);
    match first_tie(&ranks) {
        None => spell(g, ranks),
        // every member of the first tied class is tried as the seed of the
        // tie break; later ties fall back to the lowest index
        Some((tied, members)) => members
            .into_iter()
            .map(|m| spell(g, break_ties(g, split_at(g, &ranks, tied, m))))
            .min()
            .expect("tied class is non-empty"),
    }
}

/// Deterministic SMILES spelling: rank atoms, then write a depth-first
/// traversal from the highest-ranked atom. Disconnected components are
/// written separately and joined in sorted order.
pub fn canonicalize(g: &MolGraph) -> String {
    let (labels, count) = g.components();
    let mut parts: Vec<String> = (0..count).map(|c| canonicalize_component(&component_subgraph(g, &labels, c))).collect();
    parts.sort();
    parts.join(".")
}
