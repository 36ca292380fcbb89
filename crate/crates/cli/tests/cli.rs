use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_moldpo"));
    c.env("RUST_LOG", "warn");
    c
}

fn data(rel: &str) -> PathBuf {
    fs::canonicalize(format!("{}/../../data/{rel}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn run(c: &mut Command) -> Output {
    let out = c.output().unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn write_json(path: &Path, v: serde_json::Value) -> PathBuf {
    fs::write(path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path.to_path_buf()
}

fn tiny_pretrain_config(dir: &Path, corpus: &Path) -> PathBuf {
    write_json(
        &dir.join("pretrain.json"),
        serde_json::json!({
            "corpus": corpus,
            "model": {"context_length": 64, "layers": 1, "heads": 2, "embed_dim": 16},
            "epochs": 1,
            "batch_size": 64,
            "learning_rate": 3e-3,
            "warmup_steps": 10,
            "seed": 7,
            "validity_samples": 100
        }),
    )
}

/// One tiny prior shared by every test in this binary.
fn tiny_prior() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_pretrain_config(dir.path(), &data("corpus/moses_10k.smi"));
        let out = run(bin().args(["pretrain", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("prior")));
        assert!(out.status.success());
        dir
    })
    .path()
}

fn prior_ckpt() -> PathBuf {
    tiny_prior().join("prior/prior.ckpt")
}

fn short_run_config(dir: &Path, task: &Path) -> PathBuf {
    write_json(
        &dir.join("run.json"),
        serde_json::json!({
            "task": task,
            "prior": prior_ckpt(),
            "dpo": {"batch_pairs": 8, "learning_rate": 1e-3},
            "stages": [
                {"n_steps": 3, "tau": 0.2, "min_gap": 0.3},
                {"n_steps": 2, "tau": 0.1, "min_gap": 0.1, "reset_agents": true},
                {"n_steps": 2, "tau": 0.05, "min_gap": 0.05, "reset_agents": true}
            ],
            "num_agents": 2,
            "memory_size": 200,
            "sample": {"max_len": 64},
            "seeds": {"run": 11}
        }),
    )
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn csv_rows(p: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(p).unwrap().records().map(|r| r.unwrap()).collect()
}

fn jsonl_without_clock(p: &Path) -> Vec<serde_json::Value> {
    String::from_utf8(read(p))
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wallclock_ms");
            v
        })
        .collect()
}

#[test]
fn pretraining_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&read(&tiny_prior().join("prior/pretrain_report.json"))).unwrap();
    let cfg = tiny_pretrain_config(dir.path(), &data("corpus/moses_10k.smi"));
    assert!(run(bin().args(["pretrain", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("again"))).status.success());
    let again: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("again/pretrain_report.json"))).unwrap();
    assert_eq!(report["checkpoint_sha256"], again["checkpoint_sha256"]);
    assert_eq!(read(&tiny_prior().join("prior/prior.ckpt")), read(&dir.path().join("again/prior.ckpt")));
    assert_eq!(read(&tiny_prior().join("prior/pretrain_loss.csv")), read(&dir.path().join("again/pretrain_loss.csv")));
    assert_eq!(report["validity_samples"], 100);
    assert_eq!(csv_rows(&tiny_prior().join("prior/validity_samples.csv")).len(), 100);
    let m: moldpo_cli::RunManifest = serde_json::from_slice(&read(&tiny_prior().join("prior/manifest.json"))).unwrap();
    assert!(m.is_consistent());
    assert_eq!(m.command, "pretrain");
}

#[test]
fn untrained_desk_model_is_near_the_random_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["pretrain", "--epochs", "0", "--config"])
        .arg(data("configs/pretrain_desk.json"))
        .arg("--out")
        .arg(dir.path()));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("pretrain_report.json"))).unwrap();
    assert_eq!(report["validity_samples"], 1000);
    assert_eq!(report["optimizer_steps"], 0);
    let validity = report["validity"].as_f64().unwrap();
    assert!(validity < 0.10, "untrained validity {validity}");
}

#[test]
fn small_corpus_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("small.smi");
    fs::write(&corpus, "CCO\nc1ccccc1\nCC(=O)O\n").unwrap();
    let cfg = tiny_pretrain_config(dir.path(), &corpus);
    let out = run(bin().args(["pretrain", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("p")));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corpus too small"));
}

#[test]
fn exit_codes_separate_config_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(bin().args(["optimize", "--config", "/nonexistent/run.json", "--out"]).arg(dir.path()));
    assert_eq!(missing.status.code(), Some(1));
    let bad = write_json(&dir.path().join("bad.json"), serde_json::json!({"task": "t.json", "agents": 3}));
    assert_eq!(run(bin().args(["optimize", "--config"]).arg(&bad).arg("--out").arg(dir.path())).status.code(), Some(1));
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    let no_prior = write_json(
        &dir.path().join("noprior.json"),
        serde_json::json!({"task": data("tasks/toy/carbon_fraction.json"), "prior": dir.path().join("missing.ckpt")}),
    );
    assert_eq!(run(bin().args(["optimize", "--config"]).arg(&no_prior).arg("--out").arg(dir.path())).status.code(), Some(2));
    let threads = run(bin().env("MOLDPO_THREADS", "many").args(["score", "--config"]).arg(&bad).args(["--input", "x"]));
    assert_eq!(threads.status.code(), Some(1));
    assert_eq!(run(bin().arg("--version")).status.code(), Some(0));
}

#[test]
fn scoring_keeps_every_line_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.smi");
    fs::write(&input, "CC(=O)Nc1ccccc1\nnot a molecule\n\nc1ccccc1NC(C)=O\nC1CC\n").unwrap();
    let out_csv = dir.path().join("scores.csv");
    let out = run(bin()
        .args(["score", "--config"])
        .arg(data("tasks/toy/acetanilide_rediscovery.json"))
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&out_csv));
    assert!(out.status.success());
    let rows = csv_rows(&out_csv);
    assert_eq!(rows.len(), 5);
    let field = |i: usize, name: &str| {
        let h = ["smiles", "canonical", "valid", "score"].iter().position(|n| *n == name).unwrap();
        rows[i][h].to_string()
    };
    assert_eq!(field(0, "score").parse::<f64>().unwrap(), 1.0);
    assert_eq!(field(3, "score").parse::<f64>().unwrap(), 1.0);
    assert_eq!(field(0, "canonical"), field(3, "canonical"));
    for i in [1, 2, 4] {
        assert_eq!(field(i, "valid"), "false");
        assert_eq!(field(i, "score").parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(field(1, "smiles"), "not a molecule");

    // standard output carries the same table
    let stdout = run(bin().args(["score", "--config"]).arg(data("tasks/toy/acetanilide_rediscovery.json")).arg("--input").arg(&input));
    assert_eq!(stdout.stdout, read(&out_csv));
}

#[test]
fn optimize_writes_consistent_logs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_run_config(dir.path(), &data("tasks/toy/carbon_fraction.json"));
    let out = dir.path().join("run");
    assert!(run(bin().args(["optimize", "--config"]).arg(&cfg).arg("--out").arg(&out)).status.success());
    for f in ["train_log.jsonl", "metrics.csv", "bands.csv", "memory.csv", "top_molecules.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    for s in 0..3 {
        assert!(out.join(format!("stage_{s}/state.json")).is_file());
        assert!(out.join(format!("stage_{s}/agent_1.ckpt")).is_file());
    }
    let metrics = csv_rows(&out.join("metrics.csv"));
    assert_eq!(metrics.len(), 7 * 2);
    let header = csv::Reader::from_path(out.join("metrics.csv")).unwrap().headers().unwrap().clone();
    let cols: Vec<&str> = header.iter().collect();
    assert_eq!(cols, ["step", "stage", "agent_id", "top1", "top10_mean", "top100_mean", "best_smiles", "count"]);
    let log = jsonl_without_clock(&out.join("train_log.jsonl"));
    assert_eq!(log.len(), 14);
    for r in &log {
        if let Some(g) = r["min_pair_gap"].as_f64() {
            assert!(g >= r["stage_min_gap"].as_f64().unwrap());
        }
    }
    let memory = csv_rows(&out.join("memory.csv"));
    assert!(!memory.is_empty() && memory.len() <= 200);
    let scores: Vec<f64> = memory.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(csv_rows(&out.join("top_molecules.csv")).len() <= 100);

    let manifest = moldpo_cli::RunManifest::read(&out.join("manifest.json")).unwrap();
    assert!(manifest.is_consistent());
    assert_eq!(manifest.checkpoints.len(), 6);
    assert_eq!(manifest.inputs["prior"].sha256, moldpo_cli::manifest::file_sha256(&prior_ckpt()).unwrap());
    // the manifest alone is enough to run the same thing again
    let replay = write_json(&dir.path().join("replay.json"), manifest.config.clone());
    let again = dir.path().join("again");
    assert!(run(bin().args(["optimize", "--config"]).arg(&replay).arg("--out").arg(&again)).status.success());
    assert_eq!(read(&out.join("metrics.csv")), read(&again.join("metrics.csv")));

    let report_out = dir.path().join("report");
    assert!(run(bin().args(["report", "--config"]).arg(&out).arg("--out").arg(&report_out)).status.success());
    let curve = csv_rows(&report_out.join("curve.csv"));
    assert_eq!(curve.len(), 7);
    let band = csv_rows(&report_out.join("band.csv"));
    assert_eq!(band.len(), 7);
    for b in &band {
        let v: Vec<f64> = (1..4).map(|i| b[i].parse().unwrap()).collect();
        assert!(v[0] <= v[1] && v[1] <= v[2]);
    }
    // the curve is the top-10 mean of the last agent's row at each step
    let counts: Vec<usize> = metrics.iter().skip(1).step_by(2).map(|r| r[7].parse().unwrap()).collect();
    for (i, w) in curve.windows(2).enumerate() {
        if counts[i] >= 10 {
            assert!(w[1][1].parse::<f64>().unwrap() >= w[0][1].parse::<f64>().unwrap());
        }
    }
}

#[test]
fn interrupted_runs_resume_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_run_config(dir.path(), &data("tasks/toy/carbon_fraction.json"));
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    assert!(run(bin().args(["optimize", "--config"]).arg(&cfg).arg("--out").arg(&whole)).status.success());
    assert!(run(bin().args(["optimize", "--max-stages", "1", "--config"]).arg(&cfg).arg("--out").arg(&split)).status.success());
    assert_eq!(csv_rows(&split.join("metrics.csv")).len(), 3 * 2);
    let partial: serde_json::Value = serde_json::from_slice(&read(&split.join("summary.json"))).unwrap();
    assert_eq!(partial["finished"], false);

    // a half-written later stage and torn log lines are discarded on resume
    fs::create_dir_all(split.join("stage_1")).unwrap();
    fs::write(split.join("stage_1/agent_0.ckpt"), b"partial").unwrap();
    let mut log = read(&split.join("train_log.jsonl"));
    log.extend_from_slice(b"{\"step\": 3, \"agent_id\"");
    fs::write(split.join("train_log.jsonl"), log).unwrap();

    assert!(run(bin().args(["optimize", "--resume", "--config"]).arg(&cfg).arg("--out").arg(&split)).status.success());
    for f in ["metrics.csv", "bands.csv", "memory.csv", "top_molecules.csv"] {
        assert_eq!(read(&whole.join(f)), read(&split.join(f)), "{f} differs after resume");
    }
    assert_eq!(jsonl_without_clock(&whole.join("train_log.jsonl")), jsonl_without_clock(&split.join("train_log.jsonl")));
    for a in 0..2 {
        let p = format!("stage_2/agent_{a}.ckpt");
        assert_eq!(read(&whole.join(&p)), read(&split.join(&p)));
    }

    // resuming with different settings is refused
    let changed = run(bin().args(["optimize", "--resume", "--seed", "99", "--config"]).arg(&cfg).arg("--out").arg(&split));
    assert_eq!(changed.status.code(), Some(1));
}

fn one_step_config(dir: &Path) -> PathBuf {
    write_json(
        &dir.join("bench.json"),
        serde_json::json!({
            "prior": prior_ckpt(),
            "dpo": {"batch_pairs": 4},
            "stages": [{"n_steps": 1, "tau": 0.2, "min_gap": 0.0}],
            "num_agents": 2,
            "sample": {"max_len": 64},
            "seeds": {"run": 2}
        }),
    )
}

#[test]
fn benchmark_accounts_for_every_task() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = one_step_config(dir.path());
    let out = dir.path().join("bench");
    assert!(run(bin().args(["benchmark", "--config"]).arg(&cfg).arg("--tasks").arg(data("tasks")).arg("--out").arg(&out))
        .status
        .success());
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows.len(), 11);
    let header = csv::Reader::from_path(out.join("summary.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["task", "status", "top1", "top10_mean", "top100_mean", "steps", "wallclock_s"]);
    let (tasks, total) = rows.split_at(10);
    assert_eq!(&total[0][0], "Total");
    for col in 2..5 {
        let sum: f64 = tasks.iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
        assert!((sum - total[0][col].parse::<f64>().unwrap()).abs() < 1e-12);
    }
    assert!(tasks.iter().all(|r| &r[1] == "ok" && &r[5] == "1"));
    assert_eq!(&total[0][5], "10");

    // per-task determinism under the same seed
    let again = dir.path().join("again");
    assert!(run(bin().args(["benchmark", "--config"]).arg(&cfg).arg("--tasks").arg(data("tasks")).arg("--out").arg(&again))
        .status
        .success());
    for r in tasks {
        let f = format!("{}/metrics.csv", &r[0]);
        assert_eq!(read(&out.join(&f)), read(&again.join(&f)), "{f}");
    }
}

#[test]
fn one_failing_task_does_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    fs::create_dir_all(&pack).unwrap();
    fs::copy(data("tasks/toy/carbon_fraction.json"), pack.join("a_carbon.json")).unwrap();
    fs::write(pack.join("b_broken.json"), r#"{"name": "broken", "kind": "rediscovery"}"#).unwrap();
    fs::copy(data("tasks/isomers_c11h24.json"), pack.join("c_isomers.json")).unwrap();
    let cfg = one_step_config(dir.path());
    let out = dir.path().join("bench");
    let status = run(bin().args(["benchmark", "--config"]).arg(&cfg).arg("--tasks").arg(&pack).arg("--out").arg(&out)).status;
    assert!(status.success());
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][1], "ok");
    assert!(rows[1][1].starts_with("failed"));
    assert_eq!(&rows[2][1], "ok");
    assert_eq!(&rows[3][1], "2/3 ok");
}

#[test]
fn sweep_flags_feed_the_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = one_step_config(dir.path());
    let mut runs = Vec::new();
    for n in [1, 3] {
        let out = dir.path().join(format!("agents_{n}"));
        let status = run(bin()
            .args(["optimize", "--task"])
            .arg(data("tasks/toy/carbon_fraction.json"))
            .args(["--num-agents", &n.to_string(), "--sampling-ratio", "1.5", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out))
        .status;
        assert!(status.success());
        assert_eq!(csv_rows(&out.join("metrics.csv")).len(), n);
        let log = jsonl_without_clock(&out.join("train_log.jsonl"));
        assert!(log.iter().all(|r| r["n_sampled"] == 6));
        runs.push(out);
    }
    let table = dir.path().join("cmp/comparison.csv");
    assert!(run(bin().args(["report", "--compare"]).args(&runs).arg("--out").arg(&table)).status.success());
    let rows = csv_rows(&table);
    assert_eq!(rows.len(), 2);
    assert_eq!((&rows[0][0], &rows[0][1]), ("agents_1", "1"));
    assert_eq!((&rows[1][0], &rows[1][1]), ("agents_3", "3"));
}
