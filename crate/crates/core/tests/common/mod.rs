#![allow(dead_code)]

use std::sync::OnceLock;

use moldpo_chem::tasks::{load_task, load_task_file};
use moldpo_chem::{Oracle, Vocabulary};
use moldpo_core::curriculum::{RunConfig, Stage, StagePlan};
use moldpo_core::{adam_step, init_params, nll_loss_and_grad, ModelConfig, OptimizerState, Params, SampleOptions, TokenSequence};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CONTEXT: usize = 40;

pub fn data_path(rel: &str) -> String {
    format!("{}/../../data/{rel}", env!("CARGO_MANIFEST_DIR"))
}

/// Small model fitted for a few hundred steps on short corpus molecules, so
/// that a fair share of its samples parse.
pub fn small_prior() -> &'static (Params, Vocabulary) {
    static PRIOR: OnceLock<(Params, Vocabulary)> = OnceLock::new();
    PRIOR.get_or_init(|| {
        let text = std::fs::read_to_string(data_path("corpus/moses_10k.smi")).unwrap();
        let all: Vec<&str> = text.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
        let vocab = Vocabulary::from_corpus(all.iter().copied()).unwrap();
        let seqs: Vec<TokenSequence> = all
            .iter()
            .map(|s| TokenSequence::from_smiles(&vocab, s).unwrap())
            .filter(|s| s.len() <= CONTEXT)
            .take(400)
            .collect();
        let cfg = ModelConfig { context_length: CONTEXT, layers: 2, heads: 2, embed_dim: 32, ..ModelConfig::tiny(vocab.len(), 17) };
        let mut p: Params = init_params(&cfg).unwrap();
        let mut opt = OptimizerState::new(&p, 3e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        for _ in 0..12 {
            order.shuffle(&mut rng);
            for chunk in order.chunks(32) {
                let batch: Vec<TokenSequence> = chunk.iter().map(|&i| seqs[i].clone()).collect();
                let (_, g) = nll_loss_and_grad(&p, &batch).unwrap();
                adam_step(&mut p, &mut opt, &g).unwrap();
            }
        }
        (p, vocab)
    })
}

pub fn toy_oracle() -> Oracle {
    Oracle::new(load_task_file(data_path("tasks/toy/carbon_fraction.json")).unwrap())
}

/// Every molecule, valid or not, scores exactly 0.
pub fn constant_oracle() -> Oracle {
    Oracle::new(
        load_task(
            r#"{"name": "flat", "kind": "mpo", "terms": [{"property": "mol_weight", "modifier": {"shape": "gaussian", "mu": 1e6, "sigma": 1}}]}"#,
        )
        .unwrap(),
    )
}

pub fn small_run(seed: u64) -> RunConfig {
    let mut c = RunConfig::new("unused", "unused");
    c.stages = StagePlan::new(vec![
        Stage { n_steps: 4, tau: 0.2, min_gap: 0.3, reset_agents: false },
        Stage { n_steps: 3, tau: 0.1, min_gap: 0.1, reset_agents: true },
        Stage { n_steps: 3, tau: 0.05, min_gap: 0.05, reset_agents: true },
    ])
    .unwrap();
    c.num_agents = 2;
    c.dpo.batch_pairs = 8;
    c.dpo.learning_rate = 1e-3;
    c.memory_size = 40;
    c.sample = SampleOptions { temperature: 1.0, max_len: CONTEXT };
    c.seeds.run = seed;
    c
}
