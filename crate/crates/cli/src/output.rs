//! File layouts written by the commands.
//!
//! A training directory holds:
//!
//! ```text
//! manifest.json                  resolved manifest
//! circuits/n3_run00.circuit.json structure shared by all models of run 0
//! runs/n3_sqc_run00.json         one RunRecord per (qubits, model, run)
//! sweep.csv                      one row per run
//! summary.csv                    per (qubits, model) means
//! timings.json                   wall-clock seconds per run (not reproducible)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use neqc_core::analysis::{Expressibility, LandscapeGrid};
use neqc_core::{ModelKind, RunRecord};
use serde::Serialize;

pub fn run_file_name(rec: &RunRecord) -> String {
    format!(
        "n{}_{}_run{:02}.json",
        rec.config.n_qubits,
        rec.model().as_str().to_ascii_lowercase(),
        rec.run_index.unwrap_or(0)
    )
}

pub fn circuit_file_name(n_qubits: usize, run: usize) -> String {
    format!("n{n_qubits}_run{run:02}.circuit.json")
}

/// File name without `.json` / `.circuit.json`.
pub fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".json").trim_end_matches(".circuit").to_string()
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub n_qubits: usize,
    pub model: String,
    pub run: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub stop_reason: String,
}

impl SweepRow {
    pub fn from_record(r: &RunRecord) -> Self {
        Self {
            n_qubits: r.config.n_qubits,
            model: r.model().to_string(),
            run: r.run_index.unwrap_or(0),
            iterations: r.iterations_used,
            final_loss: r.final_loss().unwrap_or(f64::NAN),
            stop_reason: r.stop_reason.as_str().to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub n_qubits: usize,
    pub model: String,
    pub runs: usize,
    pub mean_iterations: f64,
    pub mean_final_loss: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub target_stops: usize,
}

/// Orders records by qubit count, run, then model.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by_key(|r| (r.config.n_qubits, r.run_index, r.model()));
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, ModelKind), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.config.n_qubits, r.model())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, model), rs)| {
            let count = rs.len() as f64;
            let its: Vec<usize> = rs.iter().map(|r| r.iterations_used).collect();
            SummaryRow {
                n_qubits: n,
                model: model.to_string(),
                runs: rs.len(),
                mean_iterations: its.iter().sum::<usize>() as f64 / count,
                mean_final_loss: rs.iter().map(|r| r.final_loss().unwrap_or(f64::NAN)).sum::<f64>() / count,
                min_iterations: its.iter().copied().min().unwrap_or(0),
                max_iterations: its.iter().copied().max().unwrap_or(0),
                target_stops: rs.iter().filter(|r| r.stop_reason == neqc_core::StopReason::Target).count(),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(dir: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    let rows: Vec<SweepRow> = records.iter().map(SweepRow::from_record).collect();
    write_csv(&dir.join("sweep.csv"), &rows)?;
    write_csv(&dir.join("summary.csv"), &summarize(records))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_record(path: &Path) -> anyhow::Result<RunRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunRecord::from_json(&text).with_context(|| format!("parsing run file {}", path.display()))
}

/// Every `*.json` under `dir/runs`, sorted.
pub fn read_run_dir(dir: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let runs = dir.join("runs");
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs)
        .with_context(|| format!("listing {}", runs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut records = paths.iter().map(|p| read_record(p)).collect::<anyhow::Result<Vec<_>>>()?;
    sort_records(&mut records);
    Ok(records)
}

/// Expressibility result line. `expr` is a number, or the string `"Inf"`.
#[derive(Debug, Serialize)]
pub struct ExprRecord {
    pub model: String,
    pub n: usize,
    pub expr: serde_json::Value,
    pub pairs: u64,
    pub bins: usize,
}

impl ExprRecord {
    pub fn new(model: ModelKind, e: &Expressibility) -> Self {
        let expr = if e.value.is_finite() {
            serde_json::json!(e.value)
        } else {
            serde_json::json!("Inf")
        };
        Self { model: model.to_string(), n: e.n_qubits, expr, pairs: e.histogram.total, bins: e.histogram.n_bins() }
    }
}

pub fn write_expressibility(dir: &Path, stem: &str, model: ModelKind, e: &Expressibility) -> anyhow::Result<ExprRecord> {
    write_csv(&dir.join(format!("{stem}.hist.csv")), &e.rows())?;
    let rec = ExprRecord::new(model, e);
    let line = serde_json::to_string(&rec)? + "\n";
    let path = dir.join(format!("{stem}.expr.json"));
    fs::write(&path, line).with_context(|| format!("writing {}", path.display()))?;
    Ok(rec)
}

#[derive(Debug, Serialize)]
pub struct LandscapeSidecar {
    pub resolution: usize,
    pub range: [f64; 2],
    pub seed: u64,
    pub center_loss: f64,
    pub model: String,
    pub n_qubits: usize,
}

/// Matrix CSV (row = y index, column = x index, no header) plus JSON sidecar.
pub fn write_landscape(dir: &Path, stem: &str, model: ModelKind, n_qubits: usize, grid: &LandscapeGrid) -> anyhow::Result<()> {
    let path = dir.join(format!("{stem}.landscape.csv"));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    for row in &grid.losses {
        w.serialize(row)?;
    }
    w.flush()?;
    let sidecar = LandscapeSidecar {
        resolution: grid.options.resolution,
        range: [-grid.options.extent, grid.options.extent],
        seed: grid.options.seed,
        center_loss: grid.center_loss,
        model: model.to_string(),
        n_qubits,
    };
    write_json(&dir.join(format!("{stem}.landscape.json")), &sidecar)
}
