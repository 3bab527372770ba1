use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neqc_cli::commands::{self, ExprArgs, ExprSource, LandscapeArgs};
use neqc_cli::manifest::{ExperimentManifest, QubitRange};
use neqc_cli::exit_code;
use neqc_core::ModelKind;

/// Train and analyse direct (SQC) and neural-generated (NEQC) variational circuits.
#[derive(Parser)]
#[command(name = "neqc", version)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the paired training sweep and write run files, sweep.csv and summary.csv.
    Train(TrainArgs),
    /// Estimate expressibility (KL divergence to Haar) of trained runs or structures.
    Expressibility(ExprCli),
    /// Evaluate the loss on a 2-D random slice around a run's optimum.
    Landscape(LandscapeCli),
    /// Rebuild sweep.csv and summary.csv from existing run files.
    Report(ReportCli),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON manifest; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Qubit counts, `A..B` (inclusive) or `A`.
    #[arg(long)]
    qubits: Option<QubitRange>,
    /// Comma-separated models: sqc, neqc-nn, neqc-cnn.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    output_scale: Option<f64>,
}

#[derive(Args)]
struct ExprCli {
    /// Trained run file (repeatable).
    #[arg(long = "run")]
    runs: Vec<PathBuf>,
    /// Circuit structure file (`.circuit.json`), sampled as SQC.
    #[arg(long = "structure")]
    structures: Vec<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Number of state pairs K.
    #[arg(long, default_value_t = neqc_core::analysis::DEFAULT_PAIRS)]
    pairs: usize,
    #[arg(long, default_value_t = neqc_core::analysis::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: next to each input).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LandscapeCli {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Half-width of both axes.
    #[arg(long, default_value_t = 0.5)]
    extent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportCli {
    /// Training output directory containing runs/.
    #[arg(long)]
    dir: PathBuf,
    /// Where to write the CSVs (default: --dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_manifest(a: &TrainArgs) -> anyhow::Result<ExperimentManifest> {
    let mut m = match &a.config {
        Some(p) => ExperimentManifest::load(p)?,
        None => ExperimentManifest::default(),
    };
    if let Some(q) = a.qubits {
        m.qubits = q;
    }
    if let Some(models) = &a.models {
        m.models = models.clone();
    }
    if let Some(r) = a.runs {
        m.runs = r;
    }
    if let Some(s) = a.seed {
        m.seed = s;
    }
    if let Some(o) = &a.out {
        m.out = o.clone();
    }
    let h = &mut m.hyperparameters;
    h.learning_rate = a.lr.or(h.learning_rate);
    h.momentum = a.momentum.or(h.momentum);
    h.max_iterations = a.max_iterations.or(h.max_iterations);
    h.n_blocks = a.blocks.or(h.n_blocks);
    h.output_scale = a.output_scale.or(h.output_scale);
    Ok(m)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => {
            let manifest = build_manifest(&a)?;
            let records = commands::train(&manifest, cli.jobs)?;
            for row in neqc_cli::output::summarize(&records) {
                println!(
                    "n={} {:<8} runs={} mean_iterations={} mean_final_loss={:.3e}",
                    row.n_qubits, row.model, row.runs, row.mean_iterations, row.mean_final_loss
                );
            }
        }
        Command::Expressibility(a) => {
            let sources = a
                .runs
                .into_iter()
                .map(ExprSource::Run)
                .chain(a.structures.into_iter().map(ExprSource::Structure))
                .collect();
            let args = ExprArgs {
                sources,
                model: a.model,
                pairs: a.pairs,
                bins: a.bins,
                seed: a.seed,
                out: a.out,
                jobs: cli.jobs,
            };
            for (model, e) in commands::expressibility(&args)? {
                println!("model={model} n={} expr={}", e.n_qubits, e.display_value());
            }
        }
        Command::Landscape(a) => {
            let args = LandscapeArgs {
                run: a.run,
                resolution: a.resolution,
                extent: a.extent,
                seed: a.seed,
                out: a.out,
                jobs: cli.jobs,
            };
            let grid = commands::landscape(&args)?;
            println!("resolution={} center_loss={}", grid.options.resolution, grid.center_loss);
        }
        Command::Report(a) => {
            let records = commands::report(&a.dir, a.out.as_deref())?;
            println!("aggregated {} run files", records.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { neqc_cli::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
