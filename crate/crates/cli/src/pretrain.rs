//! `moldpo pretrain`: vocabulary, next-token training and the validity report.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use moldpo_chem::smiles::read_corpus;
use moldpo_chem::{parse, Vocabulary};
use moldpo_core::{adam_step, init_params, nll_loss_and_grad, save_checkpoint, sample, ModelConfig, OptimizerState, Params, SampleOptions, TokenSequence};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ErrorClass};
use crate::manifest::{file_sha256, RunManifest};
use crate::paths::{absolute, read_config, resolve};

pub const PRIOR_FILE: &str = "prior.ckpt";
pub const REPORT_FILE: &str = "pretrain_report.json";
pub const LOSS_FILE: &str = "pretrain_loss.csv";
pub const SAMPLES_FILE: &str = "validity_samples.csv";
const SAMPLE_CHUNK: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    #[serde(default = "d_context")]
    pub context_length: usize,
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_heads")]
    pub heads: usize,
    #[serde(default = "d_embed")]
    pub embed_dim: usize,
}

fn d_context() -> usize {
    128
}
fn d_layers() -> usize {
    4
}
fn d_heads() -> usize {
    4
}
fn d_embed() -> usize {
    128
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape { context_length: d_context(), layers: d_layers(), heads: d_heads(), embed_dim: d_embed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub model: ModelShape,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// peak rate; linear warmup, then cosine decay to a tenth of it
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_warmup")]
    pub warmup_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_validity")]
    pub validity_samples: usize,
    #[serde(default = "d_temperature")]
    pub temperature: f64,
    #[serde(default = "d_min_corpus")]
    pub min_corpus: usize,
}

fn d_epochs() -> usize {
    10
}
fn d_batch() -> usize {
    32
}
fn d_lr() -> f64 {
    1e-3
}
fn d_warmup() -> usize {
    100
}
fn d_validity() -> usize {
    1000
}
fn d_temperature() -> f64 {
    1.0
}
fn d_min_corpus() -> usize {
    1000
}

impl PretrainConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.batch_size == 0 {
            return Err(CliError::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CliError::config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(CliError::config(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }
}

/// Learning rate at optimizer step `t` (0-based) out of `total`.
pub fn lr_at(cfg: &PretrainConfig, t: usize, total: usize) -> f64 {
    let warm = if cfg.warmup_steps == 0 { 1.0 } else { ((t + 1) as f64 / cfg.warmup_steps as f64).min(1.0) };
    let progress = if total <= 1 { 0.0 } else { t as f64 / (total - 1) as f64 };
    cfg.learning_rate * warm * (0.1 + 0.9 * 0.5 * (1.0 + (PI * progress).cos()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub corpus_lines: usize,
    pub training_sequences: usize,
    pub skipped_unparseable: usize,
    pub skipped_too_long: usize,
    pub vocab_size: usize,
    pub parameters: usize,
    pub epochs: usize,
    pub optimizer_steps: usize,
    pub final_epoch_loss: Option<f64>,
    pub validity_samples: usize,
    pub valid: usize,
    pub validity: f64,
    pub unique_valid: usize,
    pub truncated: usize,
    pub checkpoint_sha256: String,
    pub train_seconds: f64,
    pub wallclock_seconds: f64,
}

#[derive(Debug, Serialize)]
struct LossRow {
    epoch: usize,
    step: usize,
    lr: f64,
    loss: f64,
}

#[derive(Debug, Serialize)]
struct SampleRow<'a> {
    smiles: &'a str,
    valid: bool,
    truncated: bool,
}

pub struct PretrainArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
}

pub fn cmd_pretrain(args: &PretrainArgs) -> CliResult<(RunManifest, PretrainReport)> {
    let start = Instant::now();
    let mut cfg: PretrainConfig = read_config(&args.config)?;
    cfg.corpus = absolute(&resolve(&args.config, &cfg.corpus));
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let out = &args.out;
    fs::create_dir_all(out).or_runtime(|| format!("cannot create {}", out.display()))?;

    let lines = read_corpus(&cfg.corpus).or_runtime(|| format!("cannot read corpus {}", cfg.corpus.display()))?;
    let parseable: Vec<&str> = lines.iter().map(String::as_str).filter(|s| parse(s).is_ok()).collect();
    let skipped_unparseable = lines.len() - parseable.len();
    if parseable.len() < cfg.min_corpus {
        return Err(CliError::runtime(format!(
            "corpus too small: {} parseable lines, at least {} needed",
            parseable.len(),
            cfg.min_corpus
        )));
    }
    let vocab = Vocabulary::from_corpus(parseable.iter().copied()).or_runtime(|| "cannot build the vocabulary")?;
    let mut seqs = Vec::with_capacity(parseable.len());
    let mut skipped_too_long = 0;
    for s in &parseable {
        let seq = TokenSequence::from_smiles(&vocab, s).or_runtime(|| format!("cannot encode {s}"))?;
        if seq.ids().len() > cfg.model.context_length {
            skipped_too_long += 1;
        } else {
            seqs.push(seq);
        }
    }
    if seqs.is_empty() {
        return Err(CliError::runtime("no corpus molecule fits the context length"));
    }
    let model = ModelConfig {
        vocab_size: vocab.len(),
        context_length: cfg.model.context_length,
        layers: cfg.model.layers,
        heads: cfg.model.heads,
        embed_dim: cfg.model.embed_dim,
        seed: cfg.seed,
    };
    let mut params: Params = init_params(&model).or_config(|| "invalid model shape")?;
    info!("{} training sequences, vocabulary {}, {} parameters", seqs.len(), vocab.len(), params.num_scalars());

    let train_start = Instant::now();
    let (steps, final_loss) = train(&cfg, &mut params, &seqs, &out.join(LOSS_FILE))?;
    let train_seconds = train_start.elapsed().as_secs_f64();

    let ckpt = out.join(PRIOR_FILE);
    save_checkpoint(&params, None, Some(&vocab), &ckpt).or_runtime(|| format!("cannot write {}", ckpt.display()))?;
    let checkpoint_sha256 = file_sha256(&ckpt).or_runtime(|| "cannot hash the checkpoint")?;

    let (valid, unique_valid, truncated) = measure_validity(&cfg, &params, &vocab, &out.join(SAMPLES_FILE))?;
    let n = cfg.validity_samples;
    let report = PretrainReport {
        corpus_lines: lines.len(),
        training_sequences: seqs.len(),
        skipped_unparseable,
        skipped_too_long,
        vocab_size: vocab.len(),
        parameters: params.num_scalars(),
        epochs: cfg.epochs,
        optimizer_steps: steps,
        final_epoch_loss: final_loss,
        validity_samples: n,
        valid,
        validity: if n == 0 { 0.0 } else { valid as f64 / n as f64 },
        unique_valid,
        truncated,
        checkpoint_sha256,
        train_seconds,
        wallclock_seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(out.join(REPORT_FILE), serde_json::to_vec_pretty(&report).expect("report serializes"))
        .or_runtime(|| "cannot write the report")?;
    info!("validity {:.3} ({} of {})", report.validity, valid, n);

    let mut manifest = RunManifest::new("pretrain", serde_json::to_value(&cfg).expect("config serializes"));
    manifest.add_input("corpus", &cfg.corpus).or_runtime(|| "cannot hash the corpus")?;
    manifest.checkpoints.push(PRIOR_FILE.into());
    for f in [REPORT_FILE, LOSS_FILE, SAMPLES_FILE] {
        manifest.outputs.insert(f.trim_end_matches(".csv").trim_end_matches(".json").to_string(), f.into());
    }
    manifest.wallclock_seconds = start.elapsed().as_secs_f64();
    manifest.write(out).or_runtime(|| "cannot write the manifest")?;
    Ok((manifest, report))
}

fn train(cfg: &PretrainConfig, params: &mut Params, seqs: &[TokenSequence], loss_path: &Path) -> CliResult<(usize, Option<f64>)> {
    let mut log = csv::Writer::from_path(loss_path).or_runtime(|| format!("cannot write {}", loss_path.display()))?;
    let per_epoch = seqs.len().div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;
    let mut opt = OptimizerState::new(params, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_eda1_1ce5);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut step = 0;
    let mut final_loss = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TokenSequence> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            let (loss, grads) = nll_loss_and_grad(params, &batch).or_runtime(|| "training step failed")?;
            opt.lr = lr_at(cfg, step, total);
            adam_step(params, &mut opt, &grads).or_runtime(|| format!("update {step} failed"))?;
            log.serialize(LossRow { epoch, step, lr: opt.lr, loss }).or_runtime(|| "cannot log the loss")?;
            sum += loss;
            step += 1;
        }
        let mean = sum / per_epoch as f64;
        final_loss = Some(mean);
        log.flush().or_runtime(|| "cannot log the loss")?;
        info!("epoch {}/{}: mean loss {:.4}", epoch + 1, cfg.epochs, mean);
    }
    log.flush().or_runtime(|| "cannot log the loss")?;
    Ok((step, final_loss))
}

/// Samples in chunks with per-chunk seeds, so memory stays flat at any sample count.
fn measure_validity(cfg: &PretrainConfig, params: &Params, vocab: &Vocabulary, path: &Path) -> CliResult<(usize, usize, usize)> {
    let opts = SampleOptions { temperature: cfg.temperature, max_len: cfg.model.context_length };
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a4d_91e5);
    let mut out = csv::Writer::from_path(path).or_runtime(|| format!("cannot write {}", path.display()))?;
    let (mut valid, mut truncated) = (0, 0);
    let mut unique = std::collections::HashSet::new();
    let mut left = cfg.validity_samples;
    while left > 0 {
        let n = left.min(SAMPLE_CHUNK);
        let batch = sample(params, n, &opts, seeder.next_u64()).or_runtime(|| "sampling failed")?;
        for s in batch {
            let smiles = s.seq.to_smiles(vocab);
            let parsed = parse(&smiles);
            if let Ok(g) = &parsed {
                valid += 1;
                unique.insert(moldpo_chem::canonicalize(g));
            }
            truncated += s.truncated as usize;
            out.serialize(SampleRow { smiles: &smiles, valid: parsed.is_ok(), truncated: s.truncated })
                .or_runtime(|| "cannot write samples")?;
        }
        left -= n;
    }
    out.flush().or_runtime(|| "cannot write samples")?;
    Ok((valid, unique.len(), truncated))
}
