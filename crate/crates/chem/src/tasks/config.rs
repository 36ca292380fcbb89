use std::path::Path;

use serde::{Deserialize, Serialize};

use super::oracle::{PropertySelector, TaskParams, TaskSpec, Term};
use super::TaskError;
use crate::descriptors::{Modifier, ModifierSpec};
use crate::smiles::{parse, MolFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Rediscovery,
    Similarity,
    Isomer,
    Median,
    Mpo,
    MultiTarget,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub property: String,
    pub modifier: ModifierSpec,
}

/// Task document as stored on disk. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modifier: Option<ModifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<TaskConfig>>,
}

fn schema(msg: impl Into<String>) -> TaskError {
    TaskError::Schema(msg.into())
}

fn require<'a, T>(value: &'a Option<T>, field: &str, kind: TaskKind) -> Result<&'a T, TaskError> {
    value.as_ref().ok_or_else(|| schema(format!("{kind:?} task requires `{field}`")))
}

fn forbid<T>(value: &Option<T>, field: &str, kind: TaskKind) -> Result<(), TaskError> {
    match value {
        Some(_) => Err(schema(format!("`{field}` does not apply to a {kind:?} task"))),
        None => Ok(()),
    }
}

fn target_graph(smiles: &str) -> Result<crate::smiles::MolGraph, TaskError> {
    parse(smiles).map_err(|source| TaskError::InvalidTarget { smiles: smiles.to_string(), source })
}

impl TaskConfig {
    /// Validates the document and parses every embedded SMILES and formula.
    pub fn validate(&self) -> Result<TaskSpec, TaskError> {
        let kind = self.kind;
        let modifier = |spec: &ModifierSpec| Modifier::from_spec(spec).map_err(schema);
        let params = match kind {
            TaskKind::Rediscovery => {
                for (v, f) in [(&self.target2, "target2"), (&self.formula, "formula")] {
                    forbid(v, f, kind)?;
                }
                forbid(&self.modifier, "modifier", kind)?;
                forbid(&self.terms, "terms", kind)?;
                forbid(&self.aggregation, "aggregation", kind)?;
                forbid(&self.components, "components", kind)?;
                TaskParams::Rediscovery { target: target_graph(require(&self.target, "target", kind)?)? }
            }
            TaskKind::Similarity => {
                for (v, f) in [(&self.target2, "target2"), (&self.formula, "formula")] {
                    forbid(v, f, kind)?;
                }
                forbid(&self.terms, "terms", kind)?;
                forbid(&self.aggregation, "aggregation", kind)?;
                forbid(&self.components, "components", kind)?;
                TaskParams::Similarity {
                    target: target_graph(require(&self.target, "target", kind)?)?,
                    modifier: self.modifier.as_ref().map(modifier).transpose()?.unwrap_or(Modifier::Identity),
                }
            }
            TaskKind::Isomer => {
                for (v, f) in [(&self.target, "target"), (&self.target2, "target2")] {
                    forbid(v, f, kind)?;
                }
                forbid(&self.modifier, "modifier", kind)?;
                forbid(&self.terms, "terms", kind)?;
                forbid(&self.aggregation, "aggregation", kind)?;
                forbid(&self.components, "components", kind)?;
                TaskParams::Isomer { formula: MolFormula::parse(require(&self.formula, "formula", kind)?)? }
            }
            TaskKind::Median => {
                forbid(&self.formula, "formula", kind)?;
                forbid(&self.modifier, "modifier", kind)?;
                forbid(&self.terms, "terms", kind)?;
                forbid(&self.aggregation, "aggregation", kind)?;
                forbid(&self.components, "components", kind)?;
                TaskParams::Median {
                    first: target_graph(require(&self.target, "target", kind)?)?,
                    second: target_graph(require(&self.target2, "target2", kind)?)?,
                }
            }
            TaskKind::Mpo => {
                forbid(&self.target2, "target2", kind)?;
                forbid(&self.formula, "formula", kind)?;
                forbid(&self.modifier, "modifier", kind)?;
                forbid(&self.components, "components", kind)?;
                let terms = require(&self.terms, "terms", kind)?;
                if terms.is_empty() {
                    return Err(TaskError::EmptyTerms);
                }
                let target = self.target.as_deref().map(target_graph).transpose()?;
                let terms = terms
                    .iter()
                    .map(|t| {
                        let selector = PropertySelector::parse(&t.property)?;
                        if selector == PropertySelector::Similarity && target.is_none() {
                            return Err(schema("a `similarity` term needs the task `target`"));
                        }
                        Ok(Term { selector, modifier: modifier(&t.modifier)? })
                    })
                    .collect::<Result<Vec<_>, TaskError>>()?;
                TaskParams::Mpo { terms, aggregation: self.aggregation.unwrap_or_default(), target }
            }
            TaskKind::MultiTarget => {
                for (v, f) in [(&self.target, "target"), (&self.target2, "target2"), (&self.formula, "formula")] {
                    forbid(v, f, kind)?;
                }
                forbid(&self.modifier, "modifier", kind)?;
                forbid(&self.terms, "terms", kind)?;
                forbid(&self.aggregation, "aggregation", kind)?;
                let components = require(&self.components, "components", kind)?;
                if components.len() < 2 {
                    return Err(TaskError::TooFewOracles(components.len()));
                }
                TaskParams::MultiTarget {
                    components: components.iter().map(TaskConfig::validate).collect::<Result<_, _>>()?,
                }
            }
        };
        Ok(TaskSpec { name: self.name.clone(), kind, params, config: self.clone() })
    }
}

/// Parses and validates a task document.
pub fn load_task(json: &str) -> Result<TaskSpec, TaskError> {
    let config: TaskConfig = serde_json::from_str(json).map_err(|e| schema(e.to_string()))?;
    config.validate()
}

pub fn load_task_file(path: impl AsRef<Path>) -> Result<TaskSpec, TaskError> {
    load_task(&std::fs::read_to_string(path)?)
}
