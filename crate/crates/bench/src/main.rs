//! `cavsim` command line: run a scenario file and write the comparison CSV
//! and a gnuplot script next to it.

use cavsim_bench::config::{parse_config, Observable};
use cavsim_bench::output::{csv_string, emit_csv, emit_plot_script, metrics_table, OutputError};
use cavsim_bench::scenario::run_scenario;
use cavsim_core::observables::ModelTag;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cavsim",
    version,
    about = "Compare effective-atom and full cavity QED models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Output fluxes per port
    Flux(RunArgs),
    /// Incoherent emission spectra
    Spectrum(RunArgs),
    /// Second-order correlation functions
    G2(RunArgs),
    /// Run the configured observable and print discrepancy metrics
    Compare(RunArgs),
    /// Run the configured observable
    Sweep(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelChoice {
    Analytic,
    Reduced,
    Full,
    All,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    #[arg(long)]
    config: PathBuf,
    /// Models to evaluate (overrides the file)
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    /// CSV destination (overrides `output.csv`; stdout when neither is set)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of sweep points (overrides `sweep.points`)
    #[arg(long)]
    points: Option<usize>,
    /// Largest photon-number cutoff tried by the full model
    #[arg(long, default_value_t = 60)]
    nmax_cap: usize,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        source: cavsim_bench::config::ConfigError,
    },
    #[error("invalid --points: {0}")]
    Points(cavsim_bench::config::ValidationError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

fn run(command: Command) -> Result<bool, CliError> {
    let (args, observable, print_metrics) = match command {
        Command::Flux(a) => (a, Some(Observable::Flux), false),
        Command::Spectrum(a) => (a, Some(Observable::Spectrum), false),
        Command::G2(a) => (a, Some(Observable::G2), false),
        Command::Compare(a) => (a, None, true),
        Command::Sweep(a) => (a, None, false),
    };
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text).map_err(|source| CliError::Config {
        path: args.config.clone(),
        source,
    })?;
    if let Some(o) = observable {
        cfg.observable = o;
    }
    if let Some(m) = args.model {
        cfg.models = match m {
            ModelChoice::Analytic => vec![ModelTag::Analytic],
            ModelChoice::Reduced => vec![ModelTag::Reduced],
            ModelChoice::Full => vec![ModelTag::Full],
            ModelChoice::All => vec![ModelTag::Analytic, ModelTag::Reduced, ModelTag::Full],
        };
    }
    if let Some(n) = args.points {
        cfg.sweep = cfg.sweep.with_points(n).map_err(CliError::Points)?;
    }
    cfg.full.n_max_cap = args.nmax_cap;

    let report = run_scenario(&cfg);
    match args.out.or(cfg.output.csv.clone()) {
        Some(csv) => {
            emit_csv(&report, &csv)?;
            let plot = cfg
                .output
                .plot
                .clone()
                .unwrap_or_else(|| csv.with_extension("gp"));
            emit_plot_script(&report, &csv, &plot)?;
            eprintln!("wrote {} and {}", csv.display(), plot.display());
        }
        None => print!("{}", csv_string(&report)?),
    }
    if print_metrics {
        eprint!("{}", metrics_table(&report.metrics));
    }
    for t in &report.timings {
        eprintln!(
            "{:<9} {:>10.3} s  {} failed rows",
            t.model.as_str(),
            t.seconds,
            t.failures
        );
    }
    if !report.all_computed() {
        eprintln!(
            "{} of {} rows were not computed",
            report.failures(),
            report.rows.len()
        );
    }
    Ok(report.all_computed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
