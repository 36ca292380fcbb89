//! `moldpo benchmark`: one optimization run per task file, with a summary table.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ErrorClass};
use crate::manifest::RunManifest;
use crate::optimize::{cmd_optimize, load_run_config, OptimizeArgs};

pub const BENCHMARK_SUMMARY: &str = "summary.csv";
pub const TOTAL_ROW: &str = "Total";

pub struct BenchmarkArgs {
    pub config: PathBuf,
    pub tasks: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub num_agents: Option<usize>,
    pub sampling_ratio: Option<f64>,
}

/// One line of `summary.csv`; the total row sums each numeric column over all tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub task: String,
    pub status: String,
    pub top1: f64,
    pub top10_mean: f64,
    pub top100_mean: f64,
    pub steps: usize,
    pub wallclock_s: f64,
}

/// Task files directly inside `dir`, sorted by name.
pub fn task_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .or_config(|| format!("cannot list task pack {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::config(format!("no task files in {}", dir.display())));
    }
    Ok(files)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<Vec<BenchmarkRow>> {
    let start = Instant::now();
    let tasks = task_files(&args.tasks)?;
    let base = OptimizeArgs {
        config: args.config.clone(),
        seed: args.seed,
        num_agents: args.num_agents,
        sampling_ratio: args.sampling_ratio,
        ..OptimizeArgs::default()
    };
    // surfaces config problems once, before any task runs
    let config = load_run_config(&OptimizeArgs { task: Some(tasks[0].clone()), ..base.clone() })?;
    fs::create_dir_all(&args.out).or_runtime(|| format!("cannot create {}", args.out.display()))?;

    let mut rows = Vec::with_capacity(tasks.len() + 1);
    for task in &tasks {
        let name = task.file_stem().and_then(|s| s.to_str()).unwrap_or("task").to_string();
        info!("benchmark task {name}");
        let t0 = Instant::now();
        let run = OptimizeArgs { task: Some(task.clone()), out: args.out.join(&name), ..base.clone() };
        let result = catch_unwind(AssertUnwindSafe(|| cmd_optimize(&run)))
            .unwrap_or_else(|_| Err(CliError::runtime("the run panicked")));
        let row = match result {
            Ok(o) => BenchmarkRow {
                task: name,
                status: "ok".into(),
                top1: o.summary.top1,
                top10_mean: o.summary.top10_mean,
                top100_mean: o.summary.top100_mean,
                steps: o.summary.steps_run,
                wallclock_s: o.summary.wallclock_seconds,
            },
            Err(e) => {
                error!("task {name} failed: {e}");
                BenchmarkRow {
                    task: name,
                    status: format!("failed: {e}"),
                    top1: 0.0,
                    top10_mean: 0.0,
                    top100_mean: 0.0,
                    steps: 0,
                    wallclock_s: t0.elapsed().as_secs_f64(),
                }
            }
        };
        rows.push(row);
    }
    rows.push(total_row(&rows));

    let mut w = csv::Writer::from_path(args.out.join(BENCHMARK_SUMMARY)).or_runtime(|| "cannot write the summary")?;
    for r in &rows {
        w.serialize(r).or_runtime(|| "cannot write the summary")?;
    }
    w.flush().or_runtime(|| "cannot write the summary")?;

    let snapshot = serde_json::json!({
        "run": serde_json::to_value(&config).expect("config serializes"),
        "tasks": tasks,
    });
    let mut manifest = RunManifest::new("benchmark", snapshot);
    for t in &tasks {
        let stem = t.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
        manifest.add_input(stem, t).or_runtime(|| "cannot hash a task")?;
        manifest.outputs.insert(stem.to_string(), PathBuf::from(stem));
    }
    manifest.add_input("prior", &config.prior).or_runtime(|| "cannot hash the prior")?;
    manifest.outputs.insert("summary".into(), BENCHMARK_SUMMARY.into());
    manifest.wallclock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out).or_runtime(|| "cannot write the manifest")?;
    Ok(rows)
}

pub fn total_row(rows: &[BenchmarkRow]) -> BenchmarkRow {
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    BenchmarkRow {
        task: TOTAL_ROW.into(),
        status: format!("{ok}/{} ok", rows.len()),
        top1: rows.iter().map(|r| r.top1).sum(),
        top10_mean: rows.iter().map(|r| r.top10_mean).sum(),
        top100_mean: rows.iter().map(|r| r.top100_mean).sum(),
        steps: rows.iter().map(|r| r.steps).sum(),
        wallclock_s: rows.iter().map(|r| r.wallclock_s).sum(),
    }
}
