use std::collections::{HashMap, HashSet};
use std::time::Instant;

use moldpo_chem::{canonicalize, parse, Oracle, Vocabulary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agents::{reset_agents, AgentPool};
use super::config::{RunConfig, StopMetric};
use super::memory::{metrics, top_quantiles, update_memory, Memory, MemoryMetrics, ScoredMolecule, ScoredSample};
use super::plan::Stage;
use super::rng::{derive_seed, stream_rng, Purpose};
use super::select::{build_pairs, select_losers, select_winners_from};
use super::CurriculumError;
use crate::dpo::{dpo_step_cached, DpoStepStats, PreferencePair};
use crate::model::batch_sequence_log_probs;
use crate::sample::{sample, Sample};
use crate::{ModelError, Params};

/// Reference log-probabilities are dropped once this many are cached.
const REF_CACHE_LIMIT: usize = 100_000;
const REF_CHUNK: usize = 64;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub agent_id: usize,
    pub stage: usize,
    /// pre-update loss; `None` when no pair survived the gap filter
    pub loss: Option<f64>,
    pub mean_margin: Option<f64>,
    pub n_pairs: usize,
    pub wallclock_ms: f64,
    pub min_pair_gap: Option<f64>,
    pub stage_min_gap: f64,
    pub n_sampled: usize,
    pub n_valid: usize,
}

/// Memory metrics right after one agent's batch went into memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub stage: usize,
    pub agent_id: usize,
    pub top1: f64,
    pub top10_mean: f64,
    pub top100_mean: f64,
    pub best_smiles: String,
    /// entries in memory; the means cover fewer than k molecules while this is below k
    pub count: usize,
}

/// Spread of the 100 best memory scores at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub step: usize,
    pub stage: usize,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

pub trait RunObserver {
    fn agent_step(&mut self, _record: &StepRecord, _metrics: &MetricsRow) -> Result<(), CurriculumError> {
        Ok(())
    }
    fn step_end(&mut self, _band: &BandRow) -> Result<(), CurriculumError> {
        Ok(())
    }
    /// Called after each stage, before the next stage's reset.
    fn stage_end(&mut self, _stage: usize, _engine: &Engine) -> Result<(), CurriculumError> {
        Ok(())
    }
}

/// Keeps everything in memory.
#[derive(Debug, Clone, Default)]
pub struct RecordingObserver {
    pub records: Vec<StepRecord>,
    pub metrics: Vec<MetricsRow>,
    pub bands: Vec<BandRow>,
}

impl RunObserver for RecordingObserver {
    fn agent_step(&mut self, record: &StepRecord, metrics: &MetricsRow) -> Result<(), CurriculumError> {
        self.records.push(record.clone());
        self.metrics.push(metrics.clone());
        Ok(())
    }
    fn step_end(&mut self, band: &BandRow) -> Result<(), CurriculumError> {
        self.bands.push(*band);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps_run: usize,
    pub stopped_early: bool,
    pub metrics: MemoryMetrics,
    pub best_smiles: Option<String>,
}

pub struct Engine {
    pub(super) config: RunConfig,
    pub(super) prior: Params,
    pub(super) vocab: Vocabulary,
    pub(super) oracle: Oracle,
    pub(super) pool: AgentPool,
    pub(super) memory: Memory,
    pub(super) next_stage: usize,
    pub(super) next_step: usize,
    pub(super) stopped: bool,
    ref_cache: HashMap<Vec<u32>, f64>,
}

fn score_samples(oracle: &Oracle, vocab: &Vocabulary, samples: Vec<Sample>) -> Vec<ScoredSample> {
    samples
        .into_par_iter()
        .map(|s| {
            let smiles = vocab.decode_smiles(s.seq.ids()).unwrap_or_default();
            let (score, canonical) = match parse(&smiles) {
                Ok(g) => (oracle.score(&g), Some(canonicalize(&g))),
                Err(_) => (0.0, None),
            };
            ScoredSample { smiles, tokens: s.seq, score, canonical, truncated: s.truncated }
        })
        .collect()
}

/// Best distinct valid molecules of a batch, for when memory has nothing yet.
fn batch_top(batch: &[ScoredSample], k: usize, agent_id: usize, step: usize, stage: usize) -> Vec<ScoredMolecule> {
    let mut valid: Vec<&ScoredSample> = batch.iter().filter(|s| s.canonical.is_some()).collect();
    valid.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key().cmp(b.key())));
    let mut seen = HashSet::new();
    valid
        .into_iter()
        .filter(|s| seen.insert(s.key().to_string()))
        .take(k)
        .map(|s| ScoredMolecule {
            canonical: s.key().to_string(),
            tokens: s.tokens.clone(),
            score: s.score,
            agent_id,
            step,
            stage,
        })
        .collect()
}

impl Engine {
    pub fn new(config: RunConfig, prior: Params, vocab: Vocabulary, oracle: Oracle) -> Result<Self, CurriculumError> {
        config.validate()?;
        let bad = |m: String| Err(CurriculumError::InvalidConfig(m));
        if prior.config.vocab_size != vocab.len() {
            return bad(format!(
                "prior has {} output tokens but the vocabulary has {}",
                prior.config.vocab_size,
                vocab.len()
            ));
        }
        if let Some(m) = &config.model {
            if *m != prior.config {
                return bad("model section does not match the prior checkpoint".into());
            }
        }
        if config.sample.max_len > prior.config.context_length {
            return bad(format!(
                "sample max_len {} exceeds the prior's context length {}",
                config.sample.max_len, prior.config.context_length
            ));
        }
        let pool = AgentPool::new(&prior, &config.resolved_top_k(), config.dpo.learning_rate)?;
        let memory = Memory::new(config.memory_size);
        Ok(Engine {
            config,
            prior,
            vocab,
            oracle,
            pool,
            memory,
            next_stage: 0,
            next_step: 0,
            stopped: false,
            ref_cache: HashMap::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn prior(&self) -> &Params {
        &self.prior
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn pool(&self) -> &AgentPool {
        &self.pool
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    /// Index of the stage the next call to [`Engine::run_stage`] runs.
    pub fn next_stage(&self) -> usize {
        self.next_stage
    }

    /// Global index of the next step.
    pub fn next_step(&self) -> usize {
        self.next_step
    }

    pub fn is_finished(&self) -> bool {
        self.stopped || self.next_stage >= self.config.stages.len()
    }

    pub fn stopped_early(&self) -> bool {
        self.stopped
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            steps_run: self.next_step,
            stopped_early: self.stopped,
            metrics: metrics(&self.memory),
            best_smiles: self.memory.best().map(|m| m.canonical.clone()),
        }
    }

    /// Runs every remaining stage.
    pub fn run(&mut self, obs: &mut dyn RunObserver) -> Result<RunSummary, CurriculumError> {
        while !self.is_finished() {
            self.run_stage(obs)?;
        }
        Ok(self.summary())
    }

    /// Runs the next stage, resetting agents first when the stage asks for it.
    pub fn run_stage(&mut self, obs: &mut dyn RunObserver) -> Result<(), CurriculumError> {
        if self.is_finished() {
            return Ok(());
        }
        let s = self.next_stage;
        let stage = self.config.stages.stages[s];
        if stage.reset_agents && s > 0 {
            reset_agents(&mut self.pool, &self.prior);
        }
        let first = self.config.stages.first_step(s);
        for step in first..first + stage.n_steps {
            self.step(s, step, &stage, obs)?;
            self.next_step = step + 1;
            if self.stop_reached() {
                self.stopped = true;
                break;
            }
        }
        self.next_stage = s + 1;
        obs.stage_end(s, self)
    }

    fn stop_reached(&self) -> bool {
        let Some(rule) = self.config.stop else { return false };
        let m = metrics(&self.memory);
        let value = match rule.metric {
            StopMetric::Top1 => m.top1,
            StopMetric::Top10Mean => m.top10_mean,
        };
        value >= rule.threshold
    }

    fn reference_log_probs(&mut self, pair_sets: &[Vec<PreferencePair>]) -> Result<Vec<Vec<(f64, f64)>>, ModelError> {
        if self.ref_cache.len() > REF_CACHE_LIMIT {
            self.ref_cache.clear();
        }
        let mut missing: Vec<&[u32]> = Vec::new();
        let mut queued = HashSet::new();
        for p in pair_sets.iter().flatten() {
            for ids in [p.winner.ids(), p.loser.ids()] {
                if !self.ref_cache.contains_key(ids) && queued.insert(ids) {
                    missing.push(ids);
                }
            }
        }
        let prior = &self.prior;
        let computed: Vec<Vec<f64>> = missing
            .par_chunks(REF_CHUNK)
            .map(|chunk| batch_sequence_log_probs(prior, chunk))
            .collect::<Result<_, _>>()?;
        for (ids, lp) in missing.iter().zip(computed.into_iter().flatten()) {
            self.ref_cache.insert(ids.to_vec(), lp);
        }
        let cache = &self.ref_cache;
        Ok(pair_sets
            .iter()
            .map(|pairs| pairs.iter().map(|p| (cache[p.winner.ids()], cache[p.loser.ids()])).collect())
            .collect())
    }

    fn step(&mut self, s: usize, step: usize, stage: &Stage, obs: &mut dyn RunObserver) -> Result<(), CurriculumError> {
        let seed = self.config.seeds.run;
        let n_sample = self.config.samples_per_step();
        let n_pairs = self.config.dpo.batch_pairs;
        let opts = self.config.sample;

        let (oracle, vocab) = (&self.oracle, &self.vocab);
        let batches: Vec<(Vec<ScoredSample>, f64)> = self
            .pool
            .agents
            .par_iter()
            .map(|a| {
                let t0 = Instant::now();
                let drawn = sample(&a.params, n_sample, &opts, derive_seed(seed, s, step, a.id, Purpose::Sample))?;
                let scored = score_samples(oracle, vocab, drawn);
                Ok((scored, t0.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<_, ModelError>>()?;

        // memory updates happen in agent order, each agent seeing the ones before it
        let mut rows = Vec::with_capacity(batches.len());
        let mut pair_sets = Vec::with_capacity(batches.len());
        for (a, (batch, _)) in self.pool.agents.iter().zip(&batches) {
            update_memory(&mut self.memory, batch, a.id, step, s);
            let m = metrics(&self.memory);
            rows.push(MetricsRow {
                step,
                stage: s,
                agent_id: a.id,
                top1: m.top1,
                top10_mean: m.top10_mean,
                top100_mean: m.top100_mean,
                best_smiles: self.memory.best().map(|b| b.canonical.clone()).unwrap_or_default(),
                count: m.count,
            });
            let fallback;
            let candidates: Vec<&ScoredMolecule> = if self.memory.is_empty() {
                fallback = batch_top(batch, a.top_k, a.id, step, s);
                fallback.iter().collect()
            } else {
                self.memory.top(a.top_k)
            };
            let pairs = if candidates.is_empty() {
                Vec::new()
            } else {
                let winners = select_winners_from(
                    &candidates,
                    n_pairs,
                    stage.tau,
                    &mut stream_rng(seed, s, step, a.id, Purpose::Winners),
                )?;
                let losers = select_losers(batch, n_pairs, &mut stream_rng(seed, s, step, a.id, Purpose::Losers))?;
                build_pairs(&winners, &losers, stage.min_gap)?
            };
            pair_sets.push(pairs);
        }

        let refs = self.reference_log_probs(&pair_sets)?;
        let dpo = self.config.dpo;
        let updates: Vec<(Option<DpoStepStats>, f64)> = self
            .pool
            .agents
            .par_iter_mut()
            .zip(pair_sets.par_iter().zip(refs.par_iter()))
            .map(|(a, (pairs, refs))| {
                let t0 = Instant::now();
                let stats = if pairs.is_empty() {
                    None
                } else {
                    Some(dpo_step_cached(&mut a.params, &mut a.opt, pairs, refs, &dpo)?)
                };
                Ok((stats, t0.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<_, ModelError>>()?;

        for (i, row) in rows.iter().enumerate() {
            let (batch, sample_ms) = &batches[i];
            let (stats, train_ms) = &updates[i];
            let pairs = &pair_sets[i];
            let record = StepRecord {
                step,
                agent_id: row.agent_id,
                stage: s,
                loss: stats.map(|x| x.loss),
                mean_margin: stats.map(|x| x.mean_margin),
                n_pairs: pairs.len(),
                wallclock_ms: sample_ms + train_ms,
                min_pair_gap: pairs.iter().map(PreferencePair::gap).reduce(f64::min),
                stage_min_gap: stage.min_gap,
                n_sampled: batch.len(),
                n_valid: batch.iter().filter(|x| x.canonical.is_some()).count(),
            };
            obs.agent_step(&record, row)?;
        }
        let [p10, p50, p90] = top_quantiles(&self.memory, 100);
        obs.step_end(&BandRow { step, stage: s, p10, p50, p90 })
    }
}
