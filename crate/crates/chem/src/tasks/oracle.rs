use std::collections::BTreeSet;

use rayon::prelude::*;

use super::config::{Aggregation, TaskConfig, TaskKind, TermConfig};
use super::TaskError;
use crate::descriptors::{
    arithmetic_mean, circular_fingerprint, gaussian_modifier, geometric_mean, properties, tanimoto, Fingerprint,
    Modifier, ModifierSpec, PropertyVector, DEFAULT_RADIUS, DEFAULT_WIDTH,
};
use crate::smiles::{canonicalize, formula, parse, Element, MolFormula, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertySelector {
    MolWeight,
    RingCount,
    RotatableBonds,
    Tpsa,
    HeavyAtoms,
    CarbonFraction,
    /// count of one hetero element, written `hetero:N`
    Hetero(String),
    /// Tanimoto similarity to the task target
    Similarity,
}

impl PropertySelector {
    pub fn parse(name: &str) -> Result<Self, TaskError> {
        Ok(match name {
            "mol_weight" => Self::MolWeight,
            "ring_count" => Self::RingCount,
            "rotatable_bonds" => Self::RotatableBonds,
            "tpsa" => Self::Tpsa,
            "heavy_atoms" => Self::HeavyAtoms,
            "carbon_fraction" => Self::CarbonFraction,
            "similarity" => Self::Similarity,
            other => match other.strip_prefix("hetero:") {
                Some(sym) if Element::from_symbol(sym).is_some_and(|e| e != Element::C && e != Element::H) => {
                    Self::Hetero(sym.to_string())
                }
                _ => return Err(TaskError::UnknownSelector(other.to_string())),
            },
        })
    }

    fn value(&self, props: &PropertyVector) -> f64 {
        match self {
            Self::MolWeight => props.mol_weight,
            Self::RingCount => props.ring_count as f64,
            Self::RotatableBonds => props.rotatable_bonds as f64,
            Self::Tpsa => props.tpsa,
            Self::HeavyAtoms => props.heavy_atoms as f64,
            Self::CarbonFraction => props.carbon_fraction(),
            Self::Hetero(sym) => props.hetero_counts.get(sym).copied().unwrap_or(0) as f64,
            Self::Similarity => unreachable!("similarity terms are scored against the target fingerprint"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub selector: PropertySelector,
    pub modifier: Modifier,
}

/// Kind-specific task parameters with every SMILES already parsed.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskParams {
    Rediscovery { target: MolGraph },
    Similarity { target: MolGraph, modifier: Modifier },
    Isomer { formula: MolFormula },
    Median { first: MolGraph, second: MolGraph },
    Mpo { terms: Vec<Term>, aggregation: Aggregation, target: Option<MolGraph> },
    MultiTarget { components: Vec<TaskSpec> },
}

/// A validated task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub params: TaskParams,
    /// The document this spec was validated from.
    pub config: TaskConfig,
}

#[derive(Debug, Clone)]
enum Scorer {
    Similarity { target: Fingerprint, modifier: Modifier },
    Isomer { formula: MolFormula },
    Median { first: Fingerprint, second: Fingerprint },
    Mpo { terms: Vec<Term>, aggregation: Aggregation, target: Option<Fingerprint> },
    Mean(Vec<Oracle>),
}

/// Deterministic molecule → [0, 1] scoring function for one task.
#[derive(Debug, Clone)]
pub struct Oracle {
    spec: TaskSpec,
    scorer: Scorer,
}

fn fingerprint(g: &MolGraph) -> Fingerprint {
    circular_fingerprint(g, DEFAULT_RADIUS, DEFAULT_WIDTH).expect("default fingerprint parameters are valid")
}

impl Oracle {
    pub fn new(spec: TaskSpec) -> Oracle {
        let scorer = match &spec.params {
            TaskParams::Rediscovery { target } => Scorer::Similarity { target: fingerprint(target), modifier: Modifier::Identity },
            TaskParams::Similarity { target, modifier } => Scorer::Similarity { target: fingerprint(target), modifier: *modifier },
            TaskParams::Isomer { formula } => Scorer::Isomer { formula: formula.clone() },
            TaskParams::Median { first, second } => Scorer::Median { first: fingerprint(first), second: fingerprint(second) },
            TaskParams::Mpo { terms, aggregation, target } => Scorer::Mpo {
                terms: terms.clone(),
                aggregation: *aggregation,
                target: target.as_ref().map(fingerprint),
            },
            TaskParams::MultiTarget { components } => Scorer::Mean(components.iter().cloned().map(Oracle::new).collect()),
        };
        Oracle { spec, scorer }
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn score(&self, g: &MolGraph) -> f64 {
        let s = match &self.scorer {
            Scorer::Similarity { target, modifier } => modifier.apply(similarity(g, target)),
            Scorer::Isomer { formula: target } => isomer_score(&formula(g), target),
            Scorer::Median { first, second } => {
                let fp = fingerprint(g);
                let pair = [tanimoto(&fp, first).expect("same width"), tanimoto(&fp, second).expect("same width")];
                geometric_mean(&pair).expect("similarities lie in [0, 1]")
            }
            Scorer::Mpo { terms, aggregation, target } => {
                let props = properties(g);
                let fp = target.as_ref().map(|_| fingerprint(g));
                let scores: Vec<f64> = terms
                    .iter()
                    .map(|t| {
                        let x = match (&t.selector, target, &fp) {
                            (PropertySelector::Similarity, Some(tfp), Some(fp)) => tanimoto(fp, tfp).expect("same width"),
                            (sel, _, _) => sel.value(&props),
                        };
                        t.modifier.apply(x)
                    })
                    .collect();
                aggregate(*aggregation, &scores)
            }
            Scorer::Mean(oracles) => {
                let scores: Vec<f64> = oracles.iter().map(|o| o.score(g)).collect();
                arithmetic_mean(&scores).expect("components score in [0, 1]")
            }
        };
        s.clamp(0.0, 1.0)
    }

    /// Score of a SMILES string; anything that fails to parse scores 0.
    pub fn score_smiles(&self, smiles: &str) -> f64 {
        parse(smiles).map_or(0.0, |g| self.score(&g))
    }
}

fn similarity(g: &MolGraph, target: &Fingerprint) -> f64 {
    tanimoto(&fingerprint(g), target).expect("same width")
}

fn aggregate(aggregation: Aggregation, scores: &[f64]) -> f64 {
    match aggregation {
        Aggregation::Geometric => geometric_mean(scores),
        Aggregation::Arithmetic => arithmetic_mean(scores),
    }
    .expect("modifiers output [0, 1] and terms are non-empty")
}

/// Per-element closeness, gaussian with unit sigma, over the union of elements.
fn isomer_score(actual: &MolFormula, target: &MolFormula) -> f64 {
    let elements: BTreeSet<Element> = actual.counts.keys().chain(target.counts.keys()).copied().collect();
    let terms: Vec<f64> = elements
        .into_iter()
        .map(|e| gaussian_modifier(actual.count(e) as f64, target.count(e) as f64, 1.0).expect("unit sigma"))
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    geometric_mean(&terms).expect("gaussian terms lie in [0, 1]")
}

fn base_config(name: &str, kind: TaskKind) -> TaskConfig {
    TaskConfig {
        name: name.to_string(),
        kind,
        target: None,
        target2: None,
        formula: None,
        modifier: None,
        terms: None,
        aggregation: None,
        components: None,
    }
}

pub fn rediscovery_task(target: &str) -> Result<Oracle, TaskError> {
    let mut config = base_config(&format!("rediscovery {target}"), TaskKind::Rediscovery);
    config.target = Some(target.to_string());
    Ok(Oracle::new(config.validate()?))
}

pub fn similarity_task(target: &str, modifier: Option<ModifierSpec>) -> Result<Oracle, TaskError> {
    let mut config = base_config(&format!("similarity {target}"), TaskKind::Similarity);
    config.target = Some(target.to_string());
    config.modifier = modifier;
    Ok(Oracle::new(config.validate()?))
}

pub fn isomer_task(formula_text: &str) -> Result<Oracle, TaskError> {
    let mut config = base_config(&format!("isomer {formula_text}"), TaskKind::Isomer);
    config.formula = Some(formula_text.to_string());
    Ok(Oracle::new(config.validate()?))
}

pub fn median_task(first: &str, second: &str) -> Result<Oracle, TaskError> {
    let mut config = base_config(&format!("median {first} {second}"), TaskKind::Median);
    config.target = Some(first.to_string());
    config.target2 = Some(second.to_string());
    Ok(Oracle::new(config.validate()?))
}

pub fn mpo_task(terms: Vec<TermConfig>, aggregation: Aggregation, target: Option<&str>) -> Result<Oracle, TaskError> {
    let mut config = base_config("mpo", TaskKind::Mpo);
    config.terms = Some(terms);
    config.aggregation = Some(aggregation);
    config.target = target.map(str::to_string);
    Ok(Oracle::new(config.validate()?))
}

pub fn multi_target_task(oracles: &[Oracle]) -> Result<Oracle, TaskError> {
    let mut config = base_config("multi-target", TaskKind::MultiTarget);
    config.components = Some(oracles.iter().map(|o| o.spec.config.clone()).collect());
    Ok(Oracle::new(config.validate()?))
}

/// Scores a batch in input order; invalid SMILES score exactly 0.
pub fn score_batch(oracle: &Oracle, smiles: &[String]) -> Vec<f64> {
    smiles.par_iter().map(|s| oracle.score_smiles(s)).collect()
}

impl TaskSpec {
    /// Canonical SMILES of the (first) target, when the task has one.
    pub fn target_canonical(&self) -> Option<String> {
        match &self.params {
            TaskParams::Rediscovery { target } | TaskParams::Similarity { target, .. } => Some(canonicalize(target)),
            TaskParams::Median { first, .. } => Some(canonicalize(first)),
            TaskParams::Mpo { target, .. } => target.as_ref().map(canonicalize),
            _ => None,
        }
    }
}
