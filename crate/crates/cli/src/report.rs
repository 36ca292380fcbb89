//! `moldpo report`: plot-ready curve and band tables from a finished run.

use std::fs;
use std::path::{Path, PathBuf};

use moldpo_core::curriculum::{BandRow, MetricsRow};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ErrorClass};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::optimize::{RunSummaryFile, BANDS_CSV, SUMMARY_FILE};

pub const CURVE_CSV: &str = "curve.csv";
pub const BAND_CSV: &str = "band.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";

pub struct ReportArgs {
    /// a manifest file or a run directory holding one
    pub config: PathBuf,
    pub out: Option<PathBuf>,
}

pub struct CompareArgs {
    pub runs: Vec<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub top10_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandOut {
    pub step: usize,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub num_agents: usize,
    pub sampling_ratio: f64,
    pub seed: u64,
    pub steps: usize,
    pub top1: f64,
    pub top10_mean: f64,
    pub top100_mean: f64,
    pub wallclock_s: f64,
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).or_runtime(|| format!("cannot read {}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().or_runtime(|| format!("malformed {}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).or_runtime(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r).or_runtime(|| format!("cannot write {}", path.display()))?;
    }
    w.flush().or_runtime(|| format!("cannot write {}", path.display()))
}

/// The metrics state at the end of each step: the row of the last agent.
pub fn curve(metrics: &[MetricsRow]) -> Vec<CurveRow> {
    let mut out: Vec<CurveRow> = Vec::new();
    for m in metrics {
        match out.last_mut() {
            Some(last) if last.step == m.step => last.top10_mean = m.top10_mean,
            _ => out.push(CurveRow { step: m.step, top10_mean: m.top10_mean }),
        }
    }
    out
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<(Vec<CurveRow>, Vec<BandOut>)> {
    let path = manifest_path(&args.config);
    let manifest = RunManifest::read(&path).or_runtime(|| format!("cannot read manifest {}", path.display()))?;
    if manifest.command != "optimize" {
        return Err(CliError::config(format!("{} is a {} manifest, not an optimize run", path.display(), manifest.command)));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let metrics_csv = manifest.metrics_csv.as_ref().ok_or_else(|| CliError::runtime("manifest lists no metrics"))?;
    let metrics: Vec<MetricsRow> = read_rows(&dir.join(metrics_csv))?;
    let bands_csv = manifest.outputs.get("bands").cloned().unwrap_or_else(|| BANDS_CSV.into());
    let bands: Vec<BandRow> = read_rows(&dir.join(bands_csv))?;
    let curve = curve(&metrics);
    let band: Vec<BandOut> = bands.iter().map(|b| BandOut { step: b.step, p10: b.p10, p50: b.p50, p90: b.p90 }).collect();
    let out = args.out.clone().unwrap_or_else(|| dir.to_path_buf());
    fs::create_dir_all(&out).or_runtime(|| format!("cannot create {}", out.display()))?;
    write_rows(&out.join(CURVE_CSV), &curve)?;
    write_rows(&out.join(BAND_CSV), &band)?;
    Ok((curve, band))
}

/// One row per run directory, from each run's summary.
pub fn cmd_compare(args: &CompareArgs) -> CliResult<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(args.runs.len());
    for dir in &args.runs {
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read(&path).or_runtime(|| format!("cannot read {}", path.display()))?;
        let s: RunSummaryFile = serde_json::from_slice(&text).or_runtime(|| format!("malformed {}", path.display()))?;
        rows.push(ComparisonRow {
            run: dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string(),
            num_agents: s.num_agents,
            sampling_ratio: s.sampling_ratio,
            seed: s.seed,
            steps: s.steps_run,
            top1: s.top1,
            top10_mean: s.top10_mean,
            top100_mean: s.top100_mean,
            wallclock_s: s.wallclock_seconds,
        });
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).or_runtime(|| format!("cannot create {}", parent.display()))?;
    }
    write_rows(&args.out, &rows)?;
    Ok(rows)
}
