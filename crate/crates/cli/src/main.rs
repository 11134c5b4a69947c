use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fblab_cli::commands::{self, AnalyzeKind, GenerateKind};
use fblab_cli::{CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "fblab", version, about = "Free-boundary numerical laboratory")]
struct Cli {
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to FBLAB_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a field file: halfspace, minimizer or drift.
    Generate { kind: GenerateKind },
    /// Analyze a field file: weiss, blowup, fb, epi or gauge.
    Analyze { kind: AnalyzeKind, field: PathBuf },
    /// Run every invariant check and write verify.json.
    Verify,
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::parse("")?,
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cfg.threads.is_none() {
        if let Ok(v) = std::env::var("FBLAB_THREADS") {
            cfg.threads = Some(v.trim().parse().map_err(|_| CliError::input(format!("FBLAB_THREADS={v:?} is not a count")))?);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    if let Some(t) = cfg.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Generate { kind } => {
            let path = commands::generate(&cfg, *kind)?;
            println!("{}", path.display());
        }
        Command::Analyze { kind, field } => {
            commands::analyze(&cfg, *kind, field)?;
            println!("{}", cfg.out.join(format!("{}.csv", kind.as_str())).display());
        }
        Command::Verify => {
            let report = commands::verify(&cfg)?;
            for section in ["criteria", "invariants"] {
                for r in report[section].as_array().into_iter().flatten() {
                    let status = if r["passed"] == true { "PASS" } else { "FAIL" };
                    println!("{status} {}", r["name"].as_str().unwrap_or("?"));
                }
            }
            let failed = commands::failures(&report);
            if !failed.is_empty() {
                return Err(CliError::Invariant(failed.join("\n")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fblab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
