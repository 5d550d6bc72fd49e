use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polariton::config::{load_config, Experiment, MAX_SEED};
use polariton::io;
use polariton::run::{exit_code, run_command, RunOptions, EXIT_OK, EXIT_VALIDATION};
use polariton::Error;

/// Two-mode polariton condensate simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate(Common),
    /// Run N noisy realizations and average them.
    Ensemble(Common),
    /// Closed-form steady state.
    Steady(Common),
    /// Eigenvalues of the gain/loss dimer across a range of gamma.
    Spectrum(Common),
    /// First-order coherence and its decay rate.
    Correlate(Common),
    /// Steady states over a grid of pump values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Base seed (overrides `ensemble.base_seed`).
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    seed: Option<u64>,
    /// Worker threads for ensembles and sweeps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Ensemble(a) => (Experiment::Ensemble, a),
        Command::Steady(a) => (Experiment::Steady, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::Correlate(a) => (Experiment::Correlate, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
    };

    let mut cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e, args.out_dir.as_deref()),
    };
    if let Some(dir) = args.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    let opts = RunOptions {
        workers: args.workers.map(|w| w as usize),
    };
    match run_command(&cfg, experiment, opts) {
        Ok(out) => {
            println!("{}: wrote {} to {}", experiment.name(), out.files().join(", "), out.root().display());
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

/// Reports an error that happened before the output directory was known.
fn fail(err: &Error, out_dir: Option<&std::path::Path>) -> ExitCode {
    eprintln!("error: {err}");
    if let Some(dir) = out_dir {
        if let Ok(mut out) = io::OutputDir::create(dir) {
            let _ = out.write_json("error.json", &io::error_record(err));
        }
    }
    ExitCode::from(EXIT_VALIDATION as u8)
}
