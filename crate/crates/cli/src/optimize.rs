//! `moldpo optimize`: one curriculum run with its logs and stage checkpoints.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use moldpo_chem::tasks::load_task_file;
use moldpo_chem::Oracle;
use moldpo_core::curriculum::{
    latest_stage_dir, BandRow, CurriculumError, Engine, MetricsRow, RunConfig, RunObserver, StepRecord,
};
use moldpo_core::load_checkpoint;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ErrorClass};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::paths::{absolute, read_config, resolve};

pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
pub const BANDS_CSV: &str = "bands.csv";
pub const MEMORY_CSV: &str = "memory.csv";
pub const TOP_CSV: &str = "top_molecules.csv";
pub const SUMMARY_FILE: &str = "summary.json";
const TOP_LIST: usize = 100;

#[derive(Debug, Clone, Default)]
pub struct OptimizeArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub num_agents: Option<usize>,
    pub sampling_ratio: Option<f64>,
    /// replaces the config's task; used by benchmark sweeps
    pub task: Option<PathBuf>,
    pub resume: bool,
    /// stop this invocation after this many stages; `--resume` continues
    pub max_stages: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryFile {
    pub task: String,
    pub steps_run: usize,
    pub total_steps: usize,
    pub finished: bool,
    pub stopped_early: bool,
    pub top1: f64,
    pub top10_mean: f64,
    pub top100_mean: f64,
    pub count: usize,
    pub best_smiles: Option<String>,
    pub num_agents: usize,
    pub sampling_ratio: f64,
    pub seed: u64,
    pub wallclock_seconds: f64,
}

pub struct OptimizeOutcome {
    pub manifest: RunManifest,
    pub summary: RunSummaryFile,
}

#[derive(Debug, Serialize)]
struct MemoryRow<'a> {
    canonical: &'a str,
    score: f64,
    agent: usize,
    step: usize,
    stage: usize,
}

#[derive(Debug, Serialize)]
struct TopRow<'a> {
    rank: usize,
    canonical: &'a str,
    score: f64,
    agent: usize,
    step: usize,
}

/// Effective run config: file contents, overrides, and absolute paths.
pub fn load_run_config(args: &OptimizeArgs) -> CliResult<RunConfig> {
    let mut c: RunConfig = read_config(&args.config)?;
    c.task = match &args.task {
        Some(t) => absolute(t),
        None if c.task.as_os_str().is_empty() => return Err(CliError::config("the run config names no task")),
        None => absolute(&resolve(&args.config, &c.task)),
    };
    c.prior = absolute(&resolve(&args.config, &c.prior));
    if let Some(s) = args.seed {
        c.seeds.run = s;
    }
    if let Some(n) = args.num_agents {
        if c.top_k.as_ref().is_some_and(|k| k.len() != n) {
            return Err(CliError::config(format!("--num-agents {n} conflicts with the config's top_k list")));
        }
        c.num_agents = n;
    }
    if let Some(r) = args.sampling_ratio {
        c.sampling_ratio = r;
    }
    c.validate().or_config(|| "invalid run config")?;
    Ok(c)
}

fn classify(e: CurriculumError) -> CliError {
    match e {
        CurriculumError::InvalidConfig(_)
        | CurriculumError::InvalidPlan(_)
        | CurriculumError::InvalidTau(_)
        | CurriculumError::Model(_) => CliError::Config(e.into()),
        other => CliError::Runtime(anyhow::Error::new(other).context("run failed")),
    }
}

fn observer_err(e: impl std::fmt::Display) -> CurriculumError {
    CurriculumError::Observer(e.to_string())
}

/// Streams logs to disk and checkpoints every finished stage.
struct FileObserver {
    dir: PathBuf,
    log: BufWriter<File>,
    metrics: csv::Writer<File>,
    bands: csv::Writer<File>,
    last: Option<MetricsRow>,
}

impl FileObserver {
    /// Opens the logs; when resuming, keeps only rows before `next_step`.
    fn open(dir: &Path, next_step: usize) -> CliResult<Self> {
        let kept_log = read_log_before(&dir.join(TRAIN_LOG), next_step)?;
        let kept_metrics: Vec<MetricsRow> = read_csv_before(&dir.join(METRICS_CSV), next_step, |r: &MetricsRow| r.step)?;
        let kept_bands: Vec<BandRow> = read_csv_before(&dir.join(BANDS_CSV), next_step, |r: &BandRow| r.step)?;
        let create = |name: &str| File::create(dir.join(name)).or_runtime(|| format!("cannot write {name}"));
        let mut log = BufWriter::new(create(TRAIN_LOG)?);
        for line in kept_log {
            writeln!(log, "{line}").or_runtime(|| "cannot write the training log")?;
        }
        let mut metrics = csv::Writer::from_writer(create(METRICS_CSV)?);
        for r in &kept_metrics {
            metrics.serialize(r).or_runtime(|| "cannot write metrics")?;
        }
        let mut bands = csv::Writer::from_writer(create(BANDS_CSV)?);
        for r in &kept_bands {
            bands.serialize(r).or_runtime(|| "cannot write bands")?;
        }
        Ok(FileObserver { dir: dir.to_path_buf(), log, metrics, bands, last: kept_metrics.last().cloned() })
    }

    fn flush(&mut self) -> Result<(), CurriculumError> {
        self.log.flush()?;
        self.metrics.flush()?;
        self.bands.flush()?;
        Ok(())
    }
}

impl RunObserver for FileObserver {
    fn agent_step(&mut self, record: &StepRecord, metrics: &MetricsRow) -> Result<(), CurriculumError> {
        serde_json::to_writer(&mut self.log, record)?;
        self.log.write_all(b"\n")?;
        self.metrics.serialize(metrics).map_err(observer_err)?;
        self.last = Some(metrics.clone());
        Ok(())
    }

    fn step_end(&mut self, band: &BandRow) -> Result<(), CurriculumError> {
        self.bands.serialize(band).map_err(observer_err)?;
        self.flush()?;
        if let Some(m) = &self.last {
            if (band.step + 1).is_multiple_of(10) {
                info!("step {}: top1 {:.4} top10 {:.4} top100 {:.4}", band.step + 1, m.top1, m.top10_mean, m.top100_mean);
            }
        }
        Ok(())
    }

    fn stage_end(&mut self, stage: usize, engine: &Engine) -> Result<(), CurriculumError> {
        self.flush()?;
        let dir = engine.save_stage(&self.dir)?;
        info!("stage {stage} done after {} steps, saved {}", engine.next_step(), dir.display());
        Ok(())
    }
}

fn read_log_before(path: &Path, next_step: usize) -> CliResult<Vec<String>> {
    if next_step == 0 || !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).or_runtime(|| format!("cannot read {}", path.display()))?;
    let mut kept = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.or_runtime(|| format!("cannot read {}", path.display()))?;
        let v: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            // a torn final line from an interrupted write
            Err(_) => continue,
        };
        if v["step"].as_u64().is_some_and(|s| (s as usize) < next_step) {
            kept.push(line);
        }
    }
    Ok(kept)
}

fn read_csv_before<T: serde::de::DeserializeOwned>(path: &Path, next_step: usize, step: impl Fn(&T) -> usize) -> CliResult<Vec<T>> {
    if next_step == 0 || !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path).or_runtime(|| format!("cannot read {}", path.display()))?;
    let mut kept = Vec::new();
    for row in reader.deserialize::<T>() {
        match row {
            Ok(r) if step(&r) < next_step => kept.push(r),
            _ => {}
        }
    }
    Ok(kept)
}

fn remove_stage_dirs(dir: &Path) -> CliResult<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir).or_runtime(|| format!("cannot list {}", dir.display()))? {
        let path = entry.or_runtime(|| format!("cannot list {}", dir.display()))?.path();
        let is_stage = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("stage_"));
        if is_stage && path.is_dir() {
            fs::remove_dir_all(&path).or_runtime(|| format!("cannot remove {}", path.display()))?;
        }
    }
    Ok(())
}

pub fn load_oracle(task: &Path) -> CliResult<Oracle> {
    Ok(Oracle::new(load_task_file(task).or_config(|| format!("bad task {}", task.display()))?))
}

pub fn cmd_optimize(args: &OptimizeArgs) -> CliResult<OptimizeOutcome> {
    let start = Instant::now();
    let config = load_run_config(args)?;
    let oracle = load_oracle(&config.task)?;
    let ck = load_checkpoint::<f32>(&config.prior).or_runtime(|| format!("cannot load prior {}", config.prior.display()))?;
    let vocab = ck.vocab.ok_or_else(|| CliError::runtime("the prior checkpoint carries no vocabulary"))?;
    let out = &args.out;
    fs::create_dir_all(out).or_runtime(|| format!("cannot create {}", out.display()))?;

    let snapshot = serde_json::to_value(&config).expect("config serializes");
    let mut manifest = RunManifest::new("optimize", snapshot);
    let mut previous_seconds = 0.0;
    let engine = if args.resume {
        if let Ok(old) = RunManifest::read(&out.join(MANIFEST_FILE)) {
            if old.config_hash != manifest.config_hash {
                return Err(CliError::config("cannot resume: the effective config differs from the saved run"));
            }
            previous_seconds = old.wallclock_seconds;
        }
        Engine::resume(config.clone(), ck.params, vocab, oracle, out)
    } else {
        remove_stage_dirs(out)?;
        Engine::new(config.clone(), ck.params, vocab, oracle)
    };
    let mut engine = engine.map_err(classify)?;
    if args.resume {
        info!("resuming at stage {}, step {}", engine.next_stage(), engine.next_step());
    }
    let mut obs = FileObserver::open(out, engine.next_step())?;
    let mut stages = 0;
    while !engine.is_finished() && args.max_stages.is_none_or(|m| stages < m) {
        engine.run_stage(&mut obs).map_err(classify)?;
        stages += 1;
    }
    obs.flush().map_err(classify)?;
    drop(obs);

    write_memory(out, &engine)?;
    let s = engine.summary();
    let summary = RunSummaryFile {
        task: engine.oracle().name().to_string(),
        steps_run: s.steps_run,
        total_steps: config.stages.total_steps(),
        finished: engine.is_finished(),
        stopped_early: s.stopped_early,
        top1: s.metrics.top1,
        top10_mean: s.metrics.top10_mean,
        top100_mean: s.metrics.top100_mean,
        count: s.metrics.count,
        best_smiles: s.best_smiles,
        num_agents: config.num_agents,
        sampling_ratio: config.sampling_ratio,
        seed: config.seeds.run,
        wallclock_seconds: previous_seconds + start.elapsed().as_secs_f64(),
    };
    fs::write(out.join(SUMMARY_FILE), serde_json::to_vec_pretty(&summary).expect("summary serializes"))
        .or_runtime(|| "cannot write the summary")?;

    manifest.add_input("task", &config.task).or_runtime(|| "cannot hash the task")?;
    manifest.add_input("prior", &config.prior).or_runtime(|| "cannot hash the prior")?;
    manifest.checkpoints = (0..engine.next_stage())
        .flat_map(|i| {
            (0..config.num_agents).map(move |a| PathBuf::from(format!("stage_{i}/agent_{a}.ckpt")))
        })
        .collect();
    manifest.metrics_csv = Some(METRICS_CSV.into());
    manifest.jsonl_log = Some(TRAIN_LOG.into());
    for (k, f) in [("bands", BANDS_CSV), ("memory", MEMORY_CSV), ("top_molecules", TOP_CSV), ("summary", SUMMARY_FILE)] {
        manifest.outputs.insert(k.to_string(), f.into());
    }
    if let Some(dir) = latest_stage_dir(out).or_runtime(|| "cannot list stage checkpoints")? {
        manifest.outputs.insert("latest_stage".into(), dir.file_name().expect("stage dir").into());
    }
    manifest.wallclock_seconds = summary.wallclock_seconds;
    manifest.write(out).or_runtime(|| "cannot write the manifest")?;
    info!("{}: top1 {:.4}, top10 {:.4} after {} steps", summary.task, summary.top1, summary.top10_mean, summary.steps_run);
    Ok(OptimizeOutcome { manifest, summary })
}

fn write_memory(out: &Path, engine: &Engine) -> CliResult<()> {
    let mut mem = csv::Writer::from_path(out.join(MEMORY_CSV)).or_runtime(|| "cannot write the memory dump")?;
    let mut top = csv::Writer::from_path(out.join(TOP_CSV)).or_runtime(|| "cannot write the top list")?;
    for (i, m) in engine.memory().ranked().enumerate() {
        mem.serialize(MemoryRow { canonical: &m.canonical, score: m.score, agent: m.agent_id, step: m.step, stage: m.stage })
            .or_runtime(|| "cannot write the memory dump")?;
        if i < TOP_LIST {
            top.serialize(TopRow { rank: i + 1, canonical: &m.canonical, score: m.score, agent: m.agent_id, step: m.step })
                .or_runtime(|| "cannot write the top list")?;
        }
    }
    mem.flush().or_runtime(|| "cannot write the memory dump")?;
    top.flush().or_runtime(|| "cannot write the top list")?;
    Ok(())
}
