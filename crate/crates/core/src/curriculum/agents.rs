use crate::adam::OptimizerState;
use crate::params::{clone_params, Parameters};

use super::CurriculumError;

/// One policy being optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub params: Parameters<f32>,
    pub opt: OptimizerState<f32>,
    /// winners are drawn from this many best memory entries
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPool {
    pub agents: Vec<Agent>,
}

/// 1, 5, 10, 25, 50, 100, 200, 400, then doubling.
pub fn default_top_k(n: usize) -> Vec<usize> {
    let mut ks = vec![1, 5, 10, 25, 50, 100, 200, 400];
    while ks.len() < n {
        let next = ks[ks.len() - 1] * 2;
        ks.push(next);
    }
    ks.truncate(n);
    ks
}

impl AgentPool {
    /// One agent per `top_k` entry, each an independent copy of the prior.
    pub fn new(prior: &Parameters<f32>, top_k: &[usize], learning_rate: f64) -> Result<Self, CurriculumError> {
        if top_k.is_empty() {
            return Err(CurriculumError::InvalidConfig("at least one agent is required".into()));
        }
        if top_k.contains(&0) {
            return Err(CurriculumError::InvalidConfig("top_k values must be positive".into()));
        }
        let mut sorted = top_k.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != top_k.len() {
            return Err(CurriculumError::InvalidConfig(format!("top_k values must be distinct, got {top_k:?}")));
        }
        let agents = top_k
            .iter()
            .enumerate()
            .map(|(id, &k)| Agent {
                id,
                params: clone_params(prior),
                opt: OptimizerState::new(prior, learning_rate),
                top_k: k,
            })
            .collect();
        Ok(AgentPool { agents })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// Puts every agent back at the prior with a fresh optimizer.
pub fn reset_agents(pool: &mut AgentPool, prior: &Parameters<f32>) {
    for a in &mut pool.agents {
        a.params = clone_params(prior);
        a.opt = OptimizerState::new(prior, a.opt.lr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{adam_step, init_params, ModelConfig};

    #[test]
    fn top_k_defaults() {
        assert_eq!(default_top_k(4), vec![1, 5, 10, 25]);
        assert_eq!(default_top_k(1), vec![1]);
        assert_eq!(default_top_k(10)[8..], [800, 1600]);
    }

    #[test]
    fn reset_restores_the_prior() {
        let prior: Parameters<f32> = init_params(&ModelConfig::tiny(8, 1)).unwrap();
        let mut pool = AgentPool::new(&prior, &[1, 5], 1e-3).unwrap();
        let mut grads = prior.zeros_like();
        grads.tensors[0].data.fill(1.0);
        for a in &mut pool.agents {
            adam_step(&mut a.params, &mut a.opt, &grads).unwrap();
            assert_ne!(a.params, prior);
        }
        reset_agents(&mut pool, &prior);
        for a in &pool.agents {
            assert_eq!(a.params, prior);
            assert_eq!(a.opt.step, 0);
            assert!(a.opt.m.tensors.iter().all(|t| t.data.iter().all(|x| *x == 0.0)));
        }
    }

    #[test]
    fn pools_need_distinct_positive_k() {
        let prior: Parameters<f32> = init_params(&ModelConfig::tiny(8, 1)).unwrap();
        assert!(AgentPool::new(&prior, &[], 1e-3).is_err());
        assert!(AgentPool::new(&prior, &[5, 5], 1e-3).is_err());
        assert!(AgentPool::new(&prior, &[0], 1e-3).is_err());
    }
}
