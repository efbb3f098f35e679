use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use depin::experiments::{self, Command, ExperimentConfig, ExperimentError, KEY_DOCS};

#[derive(Parser, Debug)]
#[command(name = "depin", version, about = "Pinning certificates and interface simulations in random obstacle fields")]
#[command(after_long_help = key_help())]
struct Cli {
    /// Flat `key = value` config file (needs `schema_version = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report and CSV tables.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// qew or mcf.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Override any config key, e.g. `--set grid_points=2048`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// One run from a flat state; writes trace.csv (and snapshots).
    Simulate,
    /// Build the supersolution and certify it on a grid.
    VerifyCertificate,
    /// Bisect the driving force between pinned and escaped runs.
    CriticalForce,
    /// Loading loop at plateau durations T and 2T, with an obstacle-free control.
    Hysteresis,
    /// Monte Carlo survival curve of the minimal Lipschitz surface height.
    PercolationStats,
    /// Export the obstacle field.
    SampleField,
}

impl Cmd {
    fn experiment(self) -> Command {
        match self {
            Cmd::Simulate => Command::Simulate,
            Cmd::VerifyCertificate => Command::VerifyCertificate,
            Cmd::CriticalForce => Command::CriticalForce,
            Cmd::Hysteresis => Command::Hysteresis,
            Cmd::PercolationStats => Command::PercolationStats,
            Cmd::SampleField => Command::SampleField,
        }
    }
}

fn key_help() -> String {
    let mut s = String::from("Config keys (default, meaning):\n");
    for (k, d, m) in KEY_DOCS {
        s.push_str(&format!("  {k:<20} {d:<14} {m}\n"));
    }
    s.push_str("\nExit codes: 0 pass, 1 experiment failed, 2 infeasible parameters or bad config.");
    s
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &cli.model {
        cfg.set("model", m)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ExperimentError::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        if k.trim() == "schema_version" {
            continue;
        }
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let cfg = match load(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(e.exit_code() as u8));
        }
    };
    let command = cli.command.experiment();
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let start = Instant::now();
    let outcome = experiments::with_threads(threads, || experiments::run(command, &cfg))?;
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(e.exit_code() as u8));
        }
    };
    let written = report.write_to(&cli.out_dir).with_context(|| format!("writing into {}", cli.out_dir.display()))?;
    for path in &written {
        println!("{}", path.display());
    }
    println!("status = {}", if report.passed() { "pass" } else { "fail" });
    eprintln!("{} finished in {:.2?} on {threads} thread(s)", command.as_str(), start.elapsed());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
