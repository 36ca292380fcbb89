//! `moldpo` command line: pretraining, optimization runs, scoring, benchmark
//! sweeps and report tables.

pub mod benchmark;
pub mod error;
pub mod manifest;
pub mod optimize;
pub mod paths;
pub mod pretrain;
pub mod report;
pub mod score;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MOLDPO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "moldpo", version, about = "Goal-directed molecule generation with preference-pair training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a prior on a SMILES corpus and report its sampled validity
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// overrides the configured epoch count
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run the multi-agent curriculum on one task
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        num_agents: Option<usize>,
        #[arg(long)]
        sampling_ratio: Option<f64>,
        /// replaces the task named in the config
        #[arg(long)]
        task: Option<PathBuf>,
        /// continue from the latest stage checkpoint in --out
        #[arg(long)]
        resume: bool,
        /// stop after this many stages; continue later with --resume
        #[arg(long)]
        max_stages: Option<usize>,
    },
    /// Score a file of SMILES, one per line, under a task
    Score {
        /// task file
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// output CSV; standard output when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every task file in a directory and tabulate the results
    Benchmark {
        /// run config; its task is replaced by each task in turn
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        num_agents: Option<usize>,
        #[arg(long)]
        sampling_ratio: Option<f64>,
    },
    /// Curve and band tables from a run, or a comparison table over runs
    Report {
        /// manifest file or run directory
        #[arg(long, required_unless_present = "compare")]
        config: Option<PathBuf>,
        /// run directories to tabulate side by side
        #[arg(long, num_args = 1.., conflicts_with = "config")]
        compare: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Pretrain { config, out, seed, epochs } => {
            let (_, report) = pretrain::cmd_pretrain(&pretrain::PretrainArgs { config, out, seed, epochs })?;
            println!("validity {:.4} ({} / {})", report.validity, report.valid, report.validity_samples);
        }
        Command::Optimize { config, out, seed, num_agents, sampling_ratio, task, resume, max_stages } => {
            let args = optimize::OptimizeArgs { config, out, seed, num_agents, sampling_ratio, task, resume, max_stages };
            let o = optimize::cmd_optimize(&args)?;
            let s = &o.summary;
            println!(
                "{}: top1 {:.4} top10_mean {:.4} top100_mean {:.4} after {} of {} steps",
                s.task, s.top1, s.top10_mean, s.top100_mean, s.steps_run, s.total_steps
            );
        }
        Command::Score { config, input, out } => {
            score::cmd_score(&score::ScoreArgs { config, input, out })?;
        }
        Command::Benchmark { config, tasks, out, seed, num_agents, sampling_ratio } => {
            let rows = benchmark::cmd_benchmark(&benchmark::BenchmarkArgs { config, tasks, out, seed, num_agents, sampling_ratio })?;
            for r in &rows {
                println!("{:32} {:>8.4} {:>8.4} {:>8.4}  {}", r.task, r.top1, r.top10_mean, r.top100_mean, r.status);
            }
        }
        Command::Report { config, compare, out } => match config {
            Some(config) => {
                let (curve, _) = report::cmd_report(&report::ReportArgs { config, out })?;
                println!("{} curve rows", curve.len());
            }
            None => {
                let out = out.unwrap_or_else(|| PathBuf::from(report::COMPARISON_CSV));
                let rows = report::cmd_compare(&report::CompareArgs { runs: compare, out })?;
                println!("{} runs compared", rows.len());
            }
        },
    }
    Ok(())
}

/// Sizes the global worker pool from `MOLDPO_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::config(format!("{THREADS_ENV}={v} is not a count")))?;
    if n == 0 {
        return Err(CliError::config(format!("{THREADS_ENV} must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::runtime)
}
