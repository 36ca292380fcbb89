//! Stage checkpoints: `stage_<i>/` holds one checkpoint per agent (parameters
//! and Adam state), the memory and a small state file written last.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use moldpo_chem::{Oracle, Vocabulary};
use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::memory::{Memory, ScoredMolecule};
use super::{CurriculumError, RunConfig};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::{CheckpointError, Params};

pub const STATE_FILE: &str = "state.json";
const MEMORY_FILE: &str = "memory.json";

#[derive(Debug, Serialize, Deserialize)]
struct SavedState {
    stage: usize,
    next_stage: usize,
    next_step: usize,
    stopped: bool,
    top_k: Vec<usize>,
    memory_capacity: usize,
}

fn agent_file(dir: &Path, id: usize) -> PathBuf {
    dir.join(format!("agent_{id}.ckpt"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

/// The most recent complete stage directory under `run_dir`.
pub fn latest_stage_dir(run_dir: &Path) -> io::Result<Option<PathBuf>> {
    if !run_dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(run_dir)? {
        let path = entry?.path();
        let Some(i) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("stage_"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        if path.join(STATE_FILE).is_file() && best.as_ref().is_none_or(|(b, _)| i > *b) {
            best = Some((i, path));
        }
    }
    Ok(best.map(|(_, p)| p))
}

impl Engine {
    /// Writes the state after the last finished stage to `run_dir/stage_<i>`.
    pub fn save_stage(&self, run_dir: &Path) -> Result<PathBuf, CurriculumError> {
        let stage = self
            .next_stage
            .checked_sub(1)
            .ok_or_else(|| CurriculumError::InvalidConfig("no stage has finished yet".into()))?;
        let dir = run_dir.join(format!("stage_{stage}"));
        fs::create_dir_all(&dir)?;
        for a in &self.pool.agents {
            save_checkpoint(&a.params, Some(&a.opt), Some(&self.vocab), agent_file(&dir, a.id))?;
        }
        let entries: Vec<&ScoredMolecule> = self.memory.ranked().collect();
        write_atomic(&dir.join(MEMORY_FILE), &serde_json::to_vec(&entries)?)?;
        let state = SavedState {
            stage,
            next_stage: self.next_stage,
            next_step: self.next_step,
            stopped: self.stopped,
            top_k: self.pool.agents.iter().map(|a| a.top_k).collect(),
            memory_capacity: self.memory.capacity(),
        };
        write_atomic(&dir.join(STATE_FILE), &serde_json::to_vec_pretty(&state)?)?;
        Ok(dir)
    }

    /// Loads the state saved in one stage directory.
    pub fn restore_stage(&mut self, dir: &Path) -> Result<(), CurriculumError> {
        let state: SavedState = serde_json::from_slice(&fs::read(dir.join(STATE_FILE))?)?;
        let top_k: Vec<usize> = self.pool.agents.iter().map(|a| a.top_k).collect();
        if state.top_k != top_k || state.memory_capacity != self.memory.capacity() {
            return Err(CurriculumError::InvalidConfig(format!(
                "saved run has agents {:?} and memory {}, config asks for {:?} and {}",
                state.top_k,
                state.memory_capacity,
                top_k,
                self.memory.capacity()
            )));
        }
        for a in &mut self.pool.agents {
            let ck = load_checkpoint::<f32>(agent_file(dir, a.id))?;
            if !ck.params.same_shape(&self.prior) {
                return Err(CheckpointError::Incompatible(format!("agent {} does not match the prior", a.id)).into());
            }
            a.params = ck.params;
            a.opt = ck
                .optimizer
                .ok_or_else(|| CheckpointError::Malformed(format!("agent {} has no optimizer state", a.id)))?;
        }
        let entries: Vec<ScoredMolecule> = serde_json::from_slice(&fs::read(dir.join(MEMORY_FILE))?)?;
        self.memory = Memory::from_entries(state.memory_capacity, entries);
        self.next_stage = state.next_stage;
        self.next_step = state.next_step;
        self.stopped = state.stopped;
        Ok(())
    }

    /// A fresh engine, continued from the latest stage checkpoint under `run_dir` if any.
    pub fn resume(
        config: RunConfig,
        prior: Params,
        vocab: Vocabulary,
        oracle: Oracle,
        run_dir: &Path,
    ) -> Result<Self, CurriculumError> {
        let mut engine = Engine::new(config, prior, vocab, oracle)?;
        if let Some(dir) = latest_stage_dir(run_dir)? {
            engine.restore_stage(&dir)?;
        }
        Ok(engine)
    }
}
