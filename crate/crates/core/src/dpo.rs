use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, OptimizerState};
use crate::model::{backward, batch_sequence_log_probs, forward, sequence_log_prob};
use crate::params::Parameters;
use crate::scalar::Scalar;
use crate::sequence::TokenSequence;
use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpoConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_batch_pairs")]
    pub batch_pairs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_beta() -> f64 {
    0.1
}
fn default_batch_pairs() -> usize {
    50
}
fn default_lr() -> f64 {
    1e-4
}

impl Default for DpoConfig {
    fn default() -> Self {
        DpoConfig { beta: default_beta(), batch_pairs: default_batch_pairs(), learning_rate: default_lr() }
    }
}

impl DpoConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if self.batch_pairs == 0 {
            return Err(ModelError::InvalidConfig("batch_pairs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// A preferred and a dispreferred sample with their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub winner: TokenSequence,
    pub loser: TokenSequence,
    pub winner_score: f64,
    pub loser_score: f64,
    /// canonical SMILES of the winner
    pub winner_key: String,
    /// canonical SMILES of the loser, or its raw text when it does not parse
    pub loser_key: String,
}

impl PreferencePair {
    pub fn gap(&self) -> f64 {
        self.winner_score - self.loser_score
    }
}

/// log π_policy(seq) − log π_reference(seq)
pub fn log_ratio<T: Scalar>(
    policy: &Parameters<T>,
    reference: &Parameters<T>,
    seq: &TokenSequence,
) -> Result<f64, ModelError> {
    Ok(sequence_log_prob(policy, seq)? - sequence_log_prob(reference, seq)?)
}

#[derive(Debug, Clone)]
pub struct DpoOutput<T> {
    pub loss: f64,
    pub grads: Parameters<T>,
    /// mean over pairs of β·(r(winner) − r(loser))
    pub mean_margin: f64,
}

/// −log σ(z), stable for large |z|
fn neg_log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// DPO loss where the reference log-probabilities of each pair's winner and
/// loser are already known. Each distinct sequence runs through the policy once.
pub fn dpo_loss_and_grad_cached<T: Scalar>(
    policy: &Parameters<T>,
    pairs: &[PreferencePair],
    reference_logps: &[(f64, f64)],
    beta: f64,
) -> Result<DpoOutput<T>, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyPairs);
    }
    assert_eq!(pairs.len(), reference_logps.len(), "one reference pair per preference pair");
    let mut index: HashMap<&[u32], usize> = HashMap::new();
    let mut unique: Vec<&[u32]> = Vec::new();
    let mut slots = Vec::with_capacity(pairs.len());
    for p in pairs {
        let mut ids_slot = [0usize; 2];
        for (k, ids) in [p.winner.ids(), p.loser.ids()].into_iter().enumerate() {
            ids_slot[k] = *index.entry(ids).or_insert_with(|| {
                unique.push(ids);
                unique.len() - 1
            });
        }
        slots.push((ids_slot[0], ids_slot[1]));
    }
    let fwd = forward(policy, &unique)?;
    let logp = fwd.sequence_log_probs();
    let n = pairs.len() as f64;
    let mut seq_coef = vec![0.0f64; unique.len()];
    let mut loss = 0.0;
    let mut margin = 0.0;
    for (&(w, l), &(rw, rl)) in slots.iter().zip(reference_logps) {
        let z = beta * ((logp[w] - rw) - (logp[l] - rl));
        loss += neg_log_sigmoid(z);
        margin += z;
        // d/dz −log σ(z) = −σ(−z)
        let dz = -sigmoid(-z) / n;
        seq_coef[w] += dz * beta;
        seq_coef[l] -= dz * beta;
    }
    let mut coef = vec![T::zero(); fwd.rows()];
    for (s, c) in seq_coef.iter().enumerate() {
        for r in fwd.sequence_rows(s) {
            coef[r] = T::of(*c);
        }
    }
    let grads = backward(policy, &fwd, &coef);
    Ok(DpoOutput { loss: loss / n, grads, mean_margin: margin / n })
}

pub fn reference_log_probs<T: Scalar>(
    reference: &Parameters<T>,
    pairs: &[PreferencePair],
) -> Result<Vec<(f64, f64)>, ModelError> {
    let seqs: Vec<&[u32]> = pairs.iter().flat_map(|p| [p.winner.ids(), p.loser.ids()]).collect();
    let lp = batch_sequence_log_probs(reference, &seqs)?;
    Ok(lp.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Mean over pairs of −log σ(β(r(winner) − r(loser))); gradients for the policy only.
pub fn dpo_loss_and_grad<T: Scalar>(
    policy: &Parameters<T>,
    reference: &Parameters<T>,
    pairs: &[PreferencePair],
    beta: f64,
) -> Result<DpoOutput<T>, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyPairs);
    }
    let refs = reference_log_probs(reference, pairs)?;
    dpo_loss_and_grad_cached(policy, pairs, &refs, beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpoStepStats {
    /// loss before the update
    pub loss: f64,
    pub mean_margin: f64,
    pub n_pairs: usize,
}

/// One Adam update of the policy on the DPO gradient.
pub fn dpo_step_cached<T: Scalar>(
    policy: &mut Parameters<T>,
    opt: &mut OptimizerState<T>,
    pairs: &[PreferencePair],
    reference_logps: &[(f64, f64)],
    config: &DpoConfig,
) -> Result<DpoStepStats, ModelError> {
    let out = dpo_loss_and_grad_cached(policy, pairs, reference_logps, config.beta)?;
    adam_step(policy, opt, &out.grads)?;
    Ok(DpoStepStats { loss: out.loss, mean_margin: out.mean_margin, n_pairs: pairs.len() })
}

pub fn dpo_step<T: Scalar>(
    policy: &mut Parameters<T>,
    opt: &mut OptimizerState<T>,
    reference: &Parameters<T>,
    pairs: &[PreferencePair],
    config: &DpoConfig,
) -> Result<DpoStepStats, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyPairs);
    }
    let refs = reference_log_probs(reference, pairs)?;
    dpo_step_cached(policy, opt, pairs, &refs, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_log_sigmoid() {
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((neg_log_sigmoid(1.0) - 0.313_261_687_518_222_8).abs() < 1e-12);
        assert!(neg_log_sigmoid(800.0) >= 0.0 && neg_log_sigmoid(800.0) < 1e-300);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-9);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }
}
