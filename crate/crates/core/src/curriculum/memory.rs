use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::sequence::TokenSequence;

/// A molecule kept in memory, with the spelling it was sampled as.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMolecule {
    pub canonical: String,
    pub tokens: TokenSequence,
    pub score: f64,
    pub agent_id: usize,
    pub step: usize,
    pub stage: usize,
}

/// One freshly sampled and scored molecule. `canonical` is `None` when the
/// text does not parse.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub smiles: String,
    pub tokens: TokenSequence,
    pub score: f64,
    pub canonical: Option<String>,
    pub truncated: bool,
}

impl ScoredSample {
    /// Text that identifies the molecule when comparing a pair.
    pub fn key(&self) -> &str {
        self.canonical.as_deref().unwrap_or(&self.smiles)
    }
}

/// Ascending order puts the eviction candidate first; descending order is
/// score high to low, then canonical text A to Z.
#[derive(Debug, Clone, PartialEq)]
struct Rank {
    score: f64,
    canonical: String,
}

impl Eq for Rank {}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.canonical.cmp(&self.canonical))
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded map from canonical SMILES to its best scored record.
#[derive(Debug, Clone)]
pub struct Memory {
    capacity: usize,
    entries: HashMap<String, ScoredMolecule>,
    order: BTreeSet<Rank>,
}

impl PartialEq for Memory {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity && self.entries == other.entries
    }
}

impl Memory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "memory capacity must be positive");
        Memory { capacity, entries: HashMap::new(), order: BTreeSet::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, canonical: &str) -> Option<&ScoredMolecule> {
        self.entries.get(canonical)
    }

    pub fn min_score(&self) -> Option<f64> {
        self.order.first().map(|r| r.score)
    }

    /// Inserts under the dedup and capacity rules; true when memory changed.
    pub fn insert(&mut self, mol: ScoredMolecule) -> bool {
        if let Some(old) = self.entries.get(&mol.canonical) {
            if mol.score <= old.score {
                return false;
            }
            self.order.remove(&Rank { score: old.score, canonical: mol.canonical.clone() });
        } else if self.entries.len() >= self.capacity {
            let lowest = self.order.first().expect("full memory has entries");
            if mol.score <= lowest.score {
                return false;
            }
            let lowest = self.order.pop_first().expect("checked above");
            self.entries.remove(&lowest.canonical);
        }
        self.order.insert(Rank { score: mol.score, canonical: mol.canonical.clone() });
        self.entries.insert(mol.canonical.clone(), mol);
        true
    }

    /// Entries from best to worst.
    pub fn ranked(&self) -> impl Iterator<Item = &ScoredMolecule> + '_ {
        self.order.iter().rev().map(|r| &self.entries[&r.canonical])
    }

    /// The `k` best entries, or all of them when fewer are stored.
    pub fn top(&self, k: usize) -> Vec<&ScoredMolecule> {
        self.ranked().take(k).collect()
    }

    pub fn top_scores(&self, k: usize) -> Vec<f64> {
        self.order.iter().rev().take(k).map(|r| r.score).collect()
    }

    pub fn best(&self) -> Option<&ScoredMolecule> {
        self.ranked().next()
    }

    /// Rebuilds a memory from saved entries.
    pub fn from_entries(capacity: usize, entries: impl IntoIterator<Item = ScoredMolecule>) -> Self {
        let mut m = Memory::new(capacity);
        for e in entries {
            m.insert(e);
        }
        m
    }
}

/// Inserts every parseable molecule of a scored batch; returns how many changed memory.
pub fn update_memory(mem: &mut Memory, batch: &[ScoredSample], agent_id: usize, step: usize, stage: usize) -> usize {
    let mut changed = 0;
    for s in batch {
        let Some(canonical) = &s.canonical else { continue };
        let mol = ScoredMolecule {
            canonical: canonical.clone(),
            tokens: s.tokens.clone(),
            score: s.score,
            agent_id,
            step,
            stage,
        };
        if mem.insert(mol) {
            changed += 1;
        }
    }
    changed
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryMetrics {
    pub top1: f64,
    pub top10_mean: f64,
    pub top100_mean: f64,
    pub count: usize,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Means over the 1, 10 and 100 best entries (fewer when memory is smaller).
pub fn metrics(mem: &Memory) -> MemoryMetrics {
    let top = mem.top_scores(100);
    MemoryMetrics {
        top1: top.first().copied().unwrap_or(0.0),
        top10_mean: mean(&top[..top.len().min(10)]),
        top100_mean: mean(&top),
        count: mem.len(),
    }
}

/// Linearly interpolated 10th, 50th and 90th percentiles of the `k` best scores.
pub fn top_quantiles(mem: &Memory, k: usize) -> [f64; 3] {
    let mut xs = mem.top_scores(k);
    if xs.is_empty() {
        return [0.0; 3];
    }
    xs.reverse();
    let at = |q: f64| {
        let pos = q * (xs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
    };
    [at(0.1), at(0.5), at(0.9)]
}

/// Memory behind a lock: inserts are serialized, reads see a whole state.
#[derive(Debug)]
pub struct SharedMemory(RwLock<Memory>);

impl SharedMemory {
    pub fn new(mem: Memory) -> Self {
        SharedMemory(RwLock::new(mem))
    }

    pub fn update(&self, batch: &[ScoredSample], agent_id: usize, step: usize, stage: usize) -> usize {
        update_memory(&mut self.0.write().expect("memory lock"), batch, agent_id, step, stage)
    }

    pub fn metrics(&self) -> MemoryMetrics {
        metrics(&self.0.read().expect("memory lock"))
    }

    pub fn read<R>(&self, f: impl FnOnce(&Memory) -> R) -> R {
        f(&self.0.read().expect("memory lock"))
    }

    pub fn into_inner(self) -> Memory {
        self.0.into_inner().expect("memory lock")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mol(c: &str, score: f64) -> ScoredMolecule {
        ScoredMolecule {
            canonical: c.into(),
            tokens: TokenSequence::new(vec![1, 2]).unwrap(),
            score,
            agent_id: 0,
            step: 0,
            stage: 0,
        }
    }

    #[test]
    fn same_molecule_twice_keeps_one() {
        let mut m = Memory::new(10);
        assert!(m.insert(mol("CC", 0.5)));
        assert!(!m.insert(mol("CC", 0.5)));
        assert_eq!(m.len(), 1);
        assert!(m.insert(mol("CC", 0.7)));
        assert_eq!(m.len(), 1);
        assert_eq!(m.get("CC").unwrap().score, 0.7);
        assert_eq!(m.top_scores(5), vec![0.7]);
    }

    #[test]
    fn full_memory_evicts_only_for_better_molecules() {
        let mut m = Memory::new(2);
        m.insert(mol("A", 0.4));
        m.insert(mol("B", 0.6));
        let before = m.clone();
        assert!(!m.insert(mol("C", 0.3)));
        assert!(!m.insert(mol("C", 0.4)));
        assert_eq!(m, before);
        assert!(m.insert(mol("D", 0.5)));
        assert!(m.get("A").is_none());
        assert_eq!(m.len(), 2);
        assert_eq!(m.min_score(), Some(0.5));
    }

    #[test]
    fn ranking_breaks_score_ties_by_text() {
        let m = Memory::from_entries(5, [mol("CCO", 0.5), mol("CC", 0.5), mol("O", 0.9)]);
        let order: Vec<&str> = m.ranked().map(|e| e.canonical.as_str()).collect();
        assert_eq!(order, ["O", "CC", "CCO"]);
    }

    #[test]
    fn metric_examples() {
        let m = Memory::from_entries(5, [mol("A", 0.7)]);
        let x = metrics(&m);
        assert_eq!((x.top1, x.top10_mean, x.top100_mean, x.count), (0.7, 0.7, 0.7, 1));
        let m = Memory::from_entries(5, [mol("A", 1.0), mol("B", 0.8), mol("C", 0.6)]);
        let x = metrics(&m);
        assert_eq!(x.top1, 1.0);
        assert!((x.top10_mean - 0.8).abs() < 1e-12);
        let empty = metrics(&Memory::new(3));
        assert_eq!(empty.count, 0);
        assert_eq!(empty.top1, 0.0);
    }

    #[test]
    fn quantiles_are_ordered() {
        let m = Memory::from_entries(200, (0..150).map(|i| mol(&format!("C{i}"), i as f64 / 150.0)));
        let [p10, p50, p90] = top_quantiles(&m, 100);
        // the best 100 are 50/150 ..= 149/150
        assert!((p10 - 59.9 / 150.0).abs() < 1e-12);
        assert!((p50 - 99.5 / 150.0).abs() < 1e-12);
        assert!((p90 - 139.1 / 150.0).abs() < 1e-12);
        assert_eq!(top_quantiles(&Memory::new(2), 100), [0.0; 3]);
    }
}
