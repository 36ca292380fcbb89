mod common;

use common::{constant_oracle, small_prior, small_run, toy_oracle};
use moldpo_chem::Oracle;
use moldpo_core::checkpoint::checkpoint_bytes;
use moldpo_core::curriculum::{
    latest_stage_dir, metrics, Engine, MetricsRow, RecordingObserver, RunObserver, StepRecord, StopMetric, StopRule,
};
use moldpo_core::curriculum::{CurriculumError, RunConfig};

fn engine(config: RunConfig, oracle: Oracle) -> Engine {
    let (prior, vocab) = small_prior();
    Engine::new(config, prior.clone(), vocab.clone(), oracle).unwrap()
}

fn without_clock(records: &[StepRecord]) -> Vec<StepRecord> {
    records.iter().map(|r| StepRecord { wallclock_ms: 0.0, ..r.clone() }).collect()
}

/// A top-k mean over a partly filled window averages every entry, so it can
/// only be compared once k molecules are stored or memory is full.
fn assert_monotone(rows: &[MetricsRow], capacity: usize) {
    for w in rows.windows(2) {
        assert!(w[1].count >= w[0].count);
        assert!(w[1].top1 >= w[0].top1, "top1 fell: {:?} -> {:?}", w[0], w[1]);
        if w[0].count >= 10.min(capacity) {
            assert!(w[1].top10_mean >= w[0].top10_mean, "top10 fell: {:?} -> {:?}", w[0], w[1]);
        }
        if w[0].count >= 100.min(capacity) {
            assert!(w[1].top100_mean >= w[0].top100_mean, "top100 fell: {:?} -> {:?}", w[0], w[1]);
        }
    }
    for r in rows {
        assert!(r.top1 >= r.top10_mean && r.top10_mean >= r.top100_mean);
    }
}

#[test]
fn full_run_keeps_the_logged_invariants() {
    let config = small_run(1);
    let mut e = engine(config.clone(), toy_oracle());
    let mut obs = RecordingObserver::default();
    let summary = e.run(&mut obs).unwrap();
    let total = config.stages.total_steps();
    assert_eq!(summary.steps_run, total);
    assert!(!summary.stopped_early);
    for agent in 0..config.num_agents {
        assert_eq!(obs.records.iter().filter(|r| r.agent_id == agent).count(), total);
    }
    assert_eq!(obs.metrics.len(), total * config.num_agents);
    assert_eq!(obs.bands.len(), total);
    assert_monotone(&obs.metrics, config.memory_size);
    let mut trained = 0;
    for r in &obs.records {
        assert_eq!(r.stage_min_gap, config.stages.stages[r.stage].min_gap);
        assert_eq!(r.loss.is_some(), r.n_pairs > 0);
        if let Some(g) = r.min_pair_gap {
            assert!(g >= r.stage_min_gap, "{r:?}");
            trained += 1;
        }
        assert!(r.n_valid <= r.n_sampled);
        assert_eq!(r.n_sampled, config.samples_per_step());
    }
    assert!(trained > 0, "no pair survived any gap filter");
    for b in &obs.bands {
        assert!(b.p10 <= b.p50 && b.p50 <= b.p90);
    }
    let mem = e.memory();
    assert!(mem.len() <= config.memory_size);
    assert_eq!(metrics(mem).top1, obs.metrics.last().unwrap().top1);
}

#[test]
fn fixed_seeds_reproduce_the_streams() {
    let run = |seed| {
        let mut e = engine(small_run(seed), toy_oracle());
        let mut obs = RecordingObserver::default();
        e.run(&mut obs).unwrap();
        let params: Vec<Vec<u8>> = e.pool().agents.iter().map(|a| checkpoint_bytes(&a.params, None, None)).collect();
        (obs, params)
    };
    let (a, pa) = run(3);
    let (b, pb) = run(3);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(without_clock(&a.records), without_clock(&b.records));
    assert_eq!(a.bands, b.bands);
    assert_eq!(pa, pb);
    let (c, _) = run(4);
    assert_ne!(without_clock(&a.records), without_clock(&c.records));
}

#[test]
fn resuming_from_a_stage_checkpoint_continues_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut whole = engine(small_run(5), toy_oracle());
    let mut all = RecordingObserver::default();
    whole.run(&mut all).unwrap();

    let mut first = engine(small_run(5), toy_oracle());
    let mut head = RecordingObserver::default();
    first.run_stage(&mut head).unwrap();
    first.save_stage(dir.path()).unwrap();
    drop(first);
    assert!(latest_stage_dir(dir.path()).unwrap().unwrap().ends_with("stage_0"));

    let (prior, vocab) = small_prior();
    let mut resumed = Engine::resume(small_run(5), prior.clone(), vocab.clone(), toy_oracle(), dir.path()).unwrap();
    assert_eq!(resumed.next_stage(), 1);
    assert_eq!(resumed.next_step(), 4);
    let mut tail = RecordingObserver::default();
    resumed.run(&mut tail).unwrap();

    let mut joined = head.metrics.clone();
    joined.extend(tail.metrics.iter().cloned());
    assert_eq!(joined, all.metrics);
    let mut records = head.records.clone();
    records.extend(tail.records.iter().cloned());
    assert_eq!(without_clock(&records), without_clock(&all.records));
    assert_eq!(resumed.memory(), whole.memory());
    assert_eq!(resumed.pool(), whole.pool());
}

#[test]
fn flat_oracle_means_sampling_only() {
    let mut e = engine(small_run(2), constant_oracle());
    let mut obs = RecordingObserver::default();
    e.run(&mut obs).unwrap();
    assert!(obs.records.iter().all(|r| r.n_pairs == 0 && r.loss.is_none()));
    let (prior, _) = small_prior();
    assert!(e.pool().agents.iter().all(|a| a.params == *prior && a.opt.step == 0));
    assert!(obs.metrics.iter().all(|m| m.top1 == 0.0));
}

/// Captures memory and agents at every stage boundary.
#[derive(Default)]
struct Boundaries {
    inner: RecordingObserver,
    memory_sizes: Vec<usize>,
    memory_best: Vec<f64>,
}

impl RunObserver for Boundaries {
    fn agent_step(&mut self, r: &StepRecord, m: &MetricsRow) -> Result<(), CurriculumError> {
        self.inner.agent_step(r, m)
    }
    fn stage_end(&mut self, _stage: usize, engine: &Engine) -> Result<(), CurriculumError> {
        self.memory_sizes.push(engine.memory().len());
        self.memory_best.push(metrics(engine.memory()).top1);
        Ok(())
    }
}

#[test]
fn resets_keep_memory_and_restore_agents() {
    let mut config = small_run(6);
    config.memory_size = 10_000;
    let mut e = engine(config.clone(), toy_oracle());
    let mut obs = Boundaries::default();
    e.run_stage(&mut obs).unwrap();
    let before: Vec<_> = e.memory().ranked().cloned().collect();
    assert!(!before.is_empty());
    let (prior, _) = small_prior();
    assert!(e.pool().agents.iter().any(|a| a.params != *prior), "stage 0 trained nothing");

    // the second stage resets the agents; its winners can only come from memory
    e.run_stage(&mut obs).unwrap();
    for m in &before {
        assert_eq!(e.memory().get(&m.canonical), Some(m), "memory lost {}", m.canonical);
    }
    let first = obs.inner.records.iter().find(|r| r.stage == 1).unwrap();
    assert_eq!(first.step, 4);
    assert!(obs.memory_best[1] >= obs.memory_best[0]);
    for a in &e.pool().agents {
        assert!(a.opt.step <= config.stages.stages[1].n_steps as u64);
    }
}

#[test]
fn stop_rule_ends_the_run() {
    let mut config = small_run(1);
    config.stop = Some(StopRule { metric: StopMetric::Top1, threshold: 0.0 });
    let mut e = engine(config, toy_oracle());
    let mut obs = RecordingObserver::default();
    let s = e.run(&mut obs).unwrap();
    assert!(s.stopped_early);
    assert_eq!(s.steps_run, 1);
    assert!(e.is_finished());
}

#[test]
fn engine_rejects_inconsistent_setups() {
    let (prior, vocab) = small_prior();
    let mut c = small_run(1);
    c.sample.max_len = 500;
    assert!(Engine::new(c, prior.clone(), vocab.clone(), toy_oracle()).is_err());
    let mut c = small_run(1);
    c.top_k = Some(vec![3, 3]);
    assert!(Engine::new(c, prior.clone(), vocab.clone(), toy_oracle()).is_err());
}
