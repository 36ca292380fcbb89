//! Goal-directed scoring oracles and their JSON task documents.

mod config;
mod oracle;

use thiserror::Error;

use crate::smiles::{FormulaError, SmilesError};

pub use config::{load_task, load_task_file, Aggregation, TaskConfig, TaskKind, TermConfig};
pub use oracle::{
    isomer_task, median_task, mpo_task, multi_target_task, rediscovery_task, score_batch, similarity_task,
    Oracle, PropertySelector, TaskParams, TaskSpec, Term,
};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task schema error: {0}")]
    Schema(String),
    #[error("invalid target {smiles:?}: {source}")]
    InvalidTarget {
        smiles: String,
        #[source]
        source: SmilesError,
    },
    #[error(transparent)]
    MalformedFormula(#[from] FormulaError),
    #[error("multi-parameter task needs at least one term")]
    EmptyTerms,
    #[error("unknown property selector {0:?}")]
    UnknownSelector(String),
    #[error("multi-target task needs at least two component oracles, got {0}")]
    TooFewOracles(usize),
    #[error("reading task file: {0}")]
    Io(#[from] std::io::Error),
}
