//! Multi-agent optimization loop: sampling, a shared scored memory,
//! preference pairs with a narrowing score gap, and staged resets.

mod agents;
mod config;
mod engine;
mod memory;
mod persist;
mod plan;
mod rng;
mod select;

use std::io;

use thiserror::Error;

use crate::{CheckpointError, ModelError};

pub use agents::{default_top_k, reset_agents, Agent, AgentPool};
pub use config::{RunConfig, Seeds, StopMetric, StopRule};
pub use engine::{BandRow, Engine, MetricsRow, RecordingObserver, RunObserver, RunSummary, StepRecord};
pub use memory::{metrics, top_quantiles, update_memory, Memory, MemoryMetrics, ScoredMolecule, ScoredSample, SharedMemory};
pub use persist::{latest_stage_dir, STATE_FILE};
pub use plan::{Stage, StagePlan};
pub use rng::{derive_seed, stream_rng, Purpose};
pub use select::{build_pairs, select_losers, select_winners, select_winners_from};

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("memory is empty")]
    EmptyMemory,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{winners} winners but {losers} losers")]
    LengthMismatch { winners: usize, losers: usize },
    #[error("selection temperature must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("invalid stage plan: {0}")]
    InvalidPlan(String),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("observer: {0}")]
    Observer(String),
}
