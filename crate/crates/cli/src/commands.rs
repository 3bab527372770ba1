use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use neqc_core::analysis::{
    estimate_expressibility, landscape as landscape_grid, sampler_for_record, Expressibility,
    LandscapeGrid, LandscapeOptions, ModelSnapshot, SqcSampler,
};
use neqc_core::train::run_experiment;
use neqc_core::{CircuitStructure, ModelKind, RunRecord, StopReason};

use crate::manifest::ExperimentManifest;
use crate::output::{self, circuit_file_name, run_file_name, stem};
use crate::{with_jobs, Invalid};

/// Invariant violations of a finished record, if any.
pub fn record_problems(r: &RunRecord) -> Vec<String> {
    let mut out = Vec::new();
    let name = run_file_name(r);
    if let Some(e) = &r.error {
        out.push(format!("{name}: run failed: {e}"));
    }
    if r.stop_reason == StopReason::NonFinite {
        out.push(format!("{name}: loss or gradient became non-finite"));
    }
    if r.iterations_used != r.loss_history.len() {
        out.push(format!("{name}: iterations_used != loss history length"));
    }
    if r.loss_history.iter().any(|l| !(0.0..=1.0).contains(l)) {
        out.push(format!("{name}: loss outside [0, 1]"));
    }
    if r.stop_reason == StopReason::Target && r.final_loss().map_or(true, |l| l >= r.config.loss_target) {
        out.push(format!("{name}: target stop above loss target"));
    }
    if r.stop_reason == StopReason::Plateau && r.iterations_used % r.config.plateau_window != 0 {
        out.push(format!("{name}: plateau stop off the checkpoint grid"));
    }
    out
}

/// Runs the sweep described by `manifest` and writes all artifacts under
/// `manifest.out`. Returns the records in file order.
pub fn train(manifest: &ExperimentManifest, jobs: usize) -> anyhow::Result<Vec<RunRecord>> {
    manifest.validate()?;
    let out = &manifest.out;
    fs::create_dir_all(out.join("runs")).with_context(|| format!("creating {}", out.display()))?;
    fs::create_dir_all(out.join("circuits"))?;
    output::write_json(&out.join("manifest.json"), manifest)?;

    let mut all = Vec::new();
    for n in manifest.qubits.iter() {
        let template = manifest.train_config(n)?;
        let records = with_jobs(jobs, || run_experiment(&template, &manifest.models, manifest.runs, manifest.seed))??;
        for r in &records {
            if r.stop_reason != StopReason::Failed {
                let path = out.join("circuits").join(circuit_file_name(n, r.run_index.unwrap_or(0)));
                fs::write(&path, r.structure.to_json() + "\n")?;
            }
            output::write_json(&out.join("runs").join(run_file_name(r)), r)?;
        }
        all.extend(records);
    }
    output::sort_records(&mut all);
    output::write_sweep(out, &all)?;
    let timings: BTreeMap<String, f64> = all.iter().map(|r| (run_file_name(r), r.wall_time_s)).collect();
    output::write_json(&out.join("timings.json"), &timings)?;

    let problems: Vec<String> = all.iter().flat_map(record_problems).collect();
    if !problems.is_empty() {
        bail!("{} invariant violation(s):\n{}", problems.len(), problems.join("\n"));
    }
    Ok(all)
}

/// Re-aggregates the run files of a training directory into sweep/summary CSVs.
pub fn report(dir: &Path, out: Option<&Path>) -> anyhow::Result<Vec<RunRecord>> {
    let records = output::read_run_dir(dir)?;
    if records.is_empty() {
        bail!(Invalid(format!("no run files under {}", dir.join("runs").display())));
    }
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    output::write_sweep(out, &records)?;
    Ok(records)
}

#[derive(Debug, Clone)]
pub enum ExprSource {
    Run(PathBuf),
    Structure(PathBuf),
}

impl ExprSource {
    fn path(&self) -> &Path {
        match self {
            ExprSource::Run(p) | ExprSource::Structure(p) => p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExprArgs {
    pub sources: Vec<ExprSource>,
    /// Required to be SQC (or unset) for structure sources.
    pub model: Option<ModelKind>,
    pub pairs: usize,
    pub bins: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

fn out_dir(out: &Option<PathBuf>, input: &Path) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")))
}

/// Estimates expressibility for each source; writes `<stem>.hist.csv` and
/// `<stem>.expr.json` and returns `(model, result)` per source.
pub fn expressibility(args: &ExprArgs) -> anyhow::Result<Vec<(ModelKind, Expressibility)>> {
    if args.pairs == 0 {
        bail!(Invalid("--pairs must be at least 1".into()));
    }
    if args.bins == 0 {
        bail!(Invalid("--bins must be at least 1".into()));
    }
    if args.sources.is_empty() {
        bail!(Invalid("give at least one --run or --structure file".into()));
    }
    let mut results = Vec::new();
    for src in &args.sources {
        let (model, sampler) = match src {
            ExprSource::Run(p) => {
                let rec = output::read_record(p)?;
                if let Some(m) = args.model {
                    if m != rec.model() {
                        bail!(Invalid(format!("{} holds a {} run, not {m}", p.display(), rec.model())));
                    }
                }
                (rec.model(), sampler_for_record(&rec)?)
            }
            ExprSource::Structure(p) => {
                let model = args.model.unwrap_or(ModelKind::Sqc);
                if model != ModelKind::Sqc {
                    bail!(Invalid(format!("{model} expressibility needs a trained run file, not a structure")));
                }
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let structure = CircuitStructure::from_json(&text)
                    .with_context(|| format!("parsing structure {}", p.display()))?;
                (model, Box::new(SqcSampler { structure }) as Box<dyn neqc_core::analysis::StateSampler>)
            }
        };
        let e = with_jobs(args.jobs, || estimate_expressibility(sampler.as_ref(), args.pairs, args.bins, args.seed))??;
        let dir = out_dir(&args.out, src.path());
        fs::create_dir_all(&dir)?;
        output::write_expressibility(&dir, &stem(src.path()), model, &e)?;
        results.push((model, e));
    }
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct LandscapeArgs {
    pub run: PathBuf,
    pub resolution: usize,
    pub extent: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

/// Writes `<stem>.landscape.csv` and `<stem>.landscape.json` for a run file.
pub fn landscape(args: &LandscapeArgs) -> anyhow::Result<LandscapeGrid> {
    if args.resolution == 0 {
        bail!(Invalid("--resolution must be at least 1".into()));
    }
    if !(args.extent > 0.0 && args.extent.is_finite()) {
        bail!(Invalid("--extent must be positive".into()));
    }
    let rec = output::read_record(&args.run)?;
    let snapshot = ModelSnapshot::from_record(&rec)?;
    let opts = LandscapeOptions { resolution: args.resolution, extent: args.extent, seed: args.seed };
    let grid = with_jobs(args.jobs, || landscape_grid(&snapshot, opts))??;
    let dir = out_dir(&args.out, &args.run);
    fs::create_dir_all(&dir)?;
    output::write_landscape(&dir, &stem(&args.run), rec.model(), rec.config.n_qubits, &grid)?;
    Ok(grid)
}
