//! Chemistry layer: SMILES handling, molecular descriptors and the scoring
//! oracles used for goal-directed generation.

pub mod descriptors;
pub mod smiles;
pub mod tasks;

pub use descriptors::{circular_fingerprint, properties, tanimoto, Fingerprint, PropertyVector};
pub use smiles::{canonicalize, parse, tokenize, validate, MolGraph, SmilesError, Vocabulary};
pub use tasks::{Oracle, TaskSpec};
