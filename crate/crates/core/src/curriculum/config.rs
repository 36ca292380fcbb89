use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::agents::default_top_k;
use super::plan::StagePlan;
use super::CurriculumError;
use crate::config::ModelConfig;
use crate::dpo::DpoConfig;
use crate::sample::SampleOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub run: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    Top1,
    Top10Mean,
}

/// Ends a run early once a memory metric reaches `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    pub metric: StopMetric,
    pub threshold: f64,
}

/// Optimization run description as read from JSON. Paths are taken relative
/// to the config file by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// may be left out when the caller supplies the task, as benchmark sweeps do
    #[serde(default)]
    pub task: PathBuf,
    pub prior: PathBuf,
    /// when present, must match the prior checkpoint
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub dpo: DpoConfig,
    #[serde(default)]
    pub stages: StagePlan,
    #[serde(default = "default_num_agents")]
    pub num_agents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<Vec<usize>>,
    #[serde(default = "default_sampling_ratio")]
    pub sampling_ratio: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_memory_size")]
    pub memory_size: usize,
    #[serde(default)]
    pub sample: SampleOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopRule>,
}

fn default_num_agents() -> usize {
    4
}
fn default_sampling_ratio() -> f64 {
    1.0
}
fn default_memory_size() -> usize {
    1000
}

impl RunConfig {
    pub fn new(task: impl Into<PathBuf>, prior: impl Into<PathBuf>) -> Self {
        RunConfig {
            task: task.into(),
            prior: prior.into(),
            model: None,
            dpo: DpoConfig::default(),
            stages: StagePlan::default(),
            num_agents: default_num_agents(),
            top_k: None,
            sampling_ratio: default_sampling_ratio(),
            seeds: Seeds::default(),
            memory_size: default_memory_size(),
            sample: SampleOptions::default(),
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: String| Err(CurriculumError::InvalidConfig(m));
        self.dpo.validate()?;
        self.stages.validate()?;
        if self.num_agents == 0 {
            return bad("num_agents must be at least 1".into());
        }
        if let Some(k) = &self.top_k {
            if k.len() != self.num_agents {
                return bad(format!("{} top_k values for {} agents", k.len(), self.num_agents));
            }
        }
        if !(self.sampling_ratio.is_finite() && self.sampling_ratio > 0.0) {
            return bad(format!("sampling_ratio {} must be positive", self.sampling_ratio));
        }
        if self.memory_size == 0 {
            return bad("memory_size must be at least 1".into());
        }
        if !(self.sample.temperature.is_finite() && self.sample.temperature > 0.0) {
            return bad(format!("sample temperature {} must be positive", self.sample.temperature));
        }
        if self.sample.max_len < 2 {
            return bad("sample max_len must leave room for <bos> and <eos>".into());
        }
        if let Some(s) = &self.stop {
            if !(0.0..=1.0).contains(&s.threshold) {
                return bad(format!("stop threshold {} outside [0, 1]", s.threshold));
            }
        }
        Ok(())
    }

    pub fn resolved_top_k(&self) -> Vec<usize> {
        self.top_k.clone().unwrap_or_else(|| default_top_k(self.num_agents))
    }

    /// Molecules each agent samples per step.
    pub fn samples_per_step(&self) -> usize {
        ((self.sampling_ratio * self.dpo.batch_pairs as f64).ceil() as usize).max(1)
    }
}
