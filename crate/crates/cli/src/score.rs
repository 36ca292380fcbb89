//! `moldpo score`: scores a SMILES file under one task, keeping input order.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use moldpo_chem::{canonicalize, parse};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliResult, ErrorClass};
use crate::optimize::load_oracle;

pub struct ScoreArgs {
    pub config: PathBuf,
    pub input: PathBuf,
    /// CSV destination; standard output when absent
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub smiles: String,
    pub canonical: String,
    pub valid: bool,
    pub score: f64,
}

/// One row per input line, blank lines included.
pub fn score_lines(oracle: &moldpo_chem::Oracle, text: &str) -> Vec<ScoreRow> {
    let lines: Vec<&str> = text.lines().collect();
    lines
        .par_iter()
        .map(|line| {
            let smiles = line.trim();
            match parse(smiles) {
                Ok(g) => ScoreRow { smiles: smiles.into(), canonical: canonicalize(&g), valid: true, score: oracle.score(&g) },
                Err(_) => ScoreRow { smiles: smiles.into(), canonical: String::new(), valid: false, score: 0.0 },
            }
        })
        .collect()
}

pub fn cmd_score(args: &ScoreArgs) -> CliResult<Vec<ScoreRow>> {
    let oracle = load_oracle(&args.config)?;
    let text = fs::read_to_string(&args.input).or_runtime(|| format!("cannot read {}", args.input.display()))?;
    let rows = score_lines(&oracle, &text);
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(fs::File::create(p).or_runtime(|| format!("cannot write {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in &rows {
        w.serialize(r).or_runtime(|| "cannot write scores")?;
    }
    w.flush().or_runtime(|| "cannot write scores")?;
    Ok(rows)
}
