//! `gmeef`: config-driven experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gmeef",
    about = "Robust information-theoretic learning experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Path to the config document.
        config: PathBuf,
        /// Master seed, overriding the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV and resolved-config sidecar.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads for trial-parallel studies (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Describe every runnable experiment kind.
    List,
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out: PathBuf,
    threads: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let mut cfg = gmeef::ExperimentConfig::from_json_str(&text)
        .with_context(|| format!("parsing config {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let report = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            pool.install(|| gmeef::run_config(&cfg, &out))?
        }
        None => gmeef::run_config(&cfg, &out)?,
    };

    println!("wrote {}", report.csv.display());
    println!("wrote {}", report.sidecar.display());
    if let Some(err) = gmeef::runner::divergence_error(&report) {
        eprintln!("error: {err}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => run(config, seed, out, threads),
        Command::List => {
            print!("{}", gmeef::list_experiments());
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
