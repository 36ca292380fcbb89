use serde::{Deserialize, Serialize};

use super::CurriculumError;

/// One curriculum stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub n_steps: usize,
    /// winner-selection temperature
    pub tau: f64,
    /// minimum winner − loser score gap for a pair to be kept
    pub min_gap: f64,
    #[serde(default)]
    pub reset_agents: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
}

impl Default for StagePlan {
    /// 1000 steps in three stages with a shrinking gap and two resets.
    fn default() -> Self {
        StagePlan {
            stages: vec![
                Stage { n_steps: 400, tau: 0.20, min_gap: 0.5, reset_agents: false },
                Stage { n_steps: 300, tau: 0.10, min_gap: 0.2, reset_agents: true },
                Stage { n_steps: 300, tau: 0.05, min_gap: 0.05, reset_agents: true },
            ],
        }
    }
}

impl StagePlan {
    pub fn new(stages: Vec<Stage>) -> Result<Self, CurriculumError> {
        let plan = StagePlan { stages };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: String| Err(CurriculumError::InvalidPlan(m));
        if self.stages.is_empty() {
            return bad("no stages".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.n_steps == 0 {
                return bad(format!("stage {i} has no steps"));
            }
            if !(s.tau.is_finite() && s.tau > 0.0) {
                return bad(format!("stage {i}: tau {} must be positive", s.tau));
            }
            if !(0.0..=1.0).contains(&s.min_gap) {
                return bad(format!("stage {i}: min_gap {} outside [0, 1]", s.min_gap));
            }
        }
        for (i, w) in self.stages.windows(2).enumerate() {
            if w[1].tau > w[0].tau {
                return bad(format!("tau increases from stage {i} to {}", i + 1));
            }
            if w[1].min_gap > w[0].min_gap {
                return bad(format!("min_gap increases from stage {i} to {}", i + 1));
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.n_steps).sum()
    }

    /// Global index of the first step of `stage`.
    pub fn first_step(&self, stage: usize) -> usize {
        self.stages[..stage].iter().map(|s| s.n_steps).sum()
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}
