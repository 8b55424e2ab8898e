use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use cac_cli::{csv, exit, load_config, run_experiment, ExperimentConfig, Mode};
use clap::{Args, Parser, Subcommand};

/// Call admission control with bandwidth-adaptive handover priority.
#[derive(Debug, Parser)]
#[command(name = "cac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Markov chain for every scheme and load.
    Analyze(RunArgs),
    /// Analytical rows plus simulated rows with confidence intervals.
    Simulate(RunArgs),
    /// Check a config file and print a summary.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config, `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event trace destination (simulate only); overrides the config.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Base simulation seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Analyze(args) => run(args, Mode::Analyze),
        Command::Simulate(args) => run(args, Mode::Simulate),
    };
    ExitCode::from(code as u8)
}

fn validate(path: &Path) -> i32 {
    match load_config(path) {
        Ok(cfg) => {
            let mix: f64 = cfg.params.classes().iter().map(|c| c.mix).sum();
            println!(
                "ok: {} classes (mix sums to {mix:.2}), capacity {} kbit/s, {} loads, {} schemes, simulation {}",
                cfg.params.classes().len(),
                cfg.params.capacity_kbps(),
                cfg.sweep.len(),
                cfg.schemes.len(),
                if cfg.sim.is_some() { "configured" } else { "not configured" },
            );
            exit::OK
        }
        Err(e) => {
            eprintln!("{e}");
            exit::CONFIG
        }
    }
}

fn run(args: RunArgs, mode: Mode) -> i32 {
    let mut cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return exit::CONFIG;
        }
    };
    if let Some(seed) = args.seed {
        cfg.sim.get_or_insert_with(Default::default).seed = seed;
    }
    if args.out.is_some() {
        cfg.output.csv = args.out;
    }
    if args.trace.is_some() {
        cfg.output.trace = args.trace;
    }
    match execute(&cfg, mode) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::CONFIG
        }
    }
}

fn open(path: &PathBuf) -> anyhow::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(std::io::stdout().lock()));
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn execute(cfg: &ExperimentConfig, mode: Mode) -> anyhow::Result<i32> {
    let mut trace = match (&cfg.output.trace, mode) {
        (Some(path), Mode::Simulate) => Some(open(path)?),
        _ => None,
    };
    let output =
        run_experiment(cfg, mode, trace.as_deref_mut().map(|w| w as &mut dyn Write)).context("writing trace")?;
    if let Some(w) = trace.as_mut() {
        w.flush()?;
    }

    let mut sink = open(cfg.output.csv.as_ref().unwrap_or(&PathBuf::from("-")))?;
    csv::write_csv(&output.rows, output.simulated, sink.as_mut()).context("writing CSV")?;

    for f in &output.failures {
        eprintln!("{} at lambda_n={}: {}", f.scheme.label(), f.lambda_n, f.message);
    }
    Ok(if output.is_complete() { exit::OK } else { exit::SOLVER })
}
