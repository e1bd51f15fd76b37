use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sketchrate_cli::{emit_plot_data, run_experiment, CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sketchrate", version, about = "Run sketch-and-project experiments and write CSV results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical and predicted rates against sketch size.
    RateSweep(Opts),
    /// Relative error per iteration.
    ConvergenceCurves(Opts),
    /// Smallest eigenvalue of E[P] against its surrogate.
    SurrogateCompare(Opts),
    /// Final error against non-zeros per sketch row.
    SparsitySweep(Opts),
    /// Randomized SVD error and its upper bound.
    RandsvdErr(Opts),
    /// Per-eigenvector decay of the error.
    Eigendecay(Opts),
    /// Randomized Subspace Newton on ridge logistic regression.
    NewtonDemo(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render an SVG chart.
    #[arg(long)]
    svg: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Experiment, Opts) {
        match self {
            Command::RateSweep(o) => (Experiment::RateSweep, o),
            Command::ConvergenceCurves(o) => (Experiment::ConvergenceCurves, o),
            Command::SurrogateCompare(o) => (Experiment::SurrogateCompare, o),
            Command::SparsitySweep(o) => (Experiment::SparsitySweep, o),
            Command::RandsvdErr(o) => (Experiment::RandsvdErr, o),
            Command::Eigendecay(o) => (Experiment::Eigendecay, o),
            Command::NewtonDemo(o) => (Experiment::NewtonDemo, o),
        }
    }
}

fn build_config(experiment: Experiment, opts: &Opts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    match cfg.experiment {
        Some(e) if e != experiment => {
            return Err(CliError::Config { field: "experiment".into(), msg: format!("config says {e}, command is {experiment}") })
        }
        _ => cfg.experiment = Some(experiment),
    }
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn execute(experiment: Experiment, opts: &Opts) -> Result<(), CliError> {
    let cfg = build_config(experiment, opts)?;
    if opts.threads == Some(0) {
        return Err(CliError::Config { field: "--threads".into(), msg: "must be positive".into() });
    }
    let work = || -> Result<(), CliError> {
        let report = run_experiment(&cfg)?;
        for t in &report.tables {
            emit_plot_data(t, experiment.as_str(), &cfg.output, &report.metadata, opts.svg)?;
        }
        for f in &report.files {
            println!("{}", f.display());
        }
        Ok(())
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config { field: "--threads".into(), msg: e.to_string() })?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    let (experiment, opts) = Cli::parse().command.split();
    match execute(experiment, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
