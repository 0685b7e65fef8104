//! `voltra` — command-line front door for the AFV/AFI library.
//!
//! Every run reads one sectioned key-value config, writes CSV artifacts plus
//! a manifest into the output directory, and is bit-reproducible: all
//! randomness flows from the `seed` key, never from the clock or the OS.

mod commands;
mod config;
mod table;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::Command;

#[derive(Parser)]
#[command(name = "voltra", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the gamma-resolvent of the configured kernel
    Resolvent(RunArgs),
    /// Solve the convolution Riccati equation on the time grid
    Riccati(RunArgs),
    /// Evaluate the CGF log E[exp(u(X_T - X_0))] over the (T, u) grid
    Cgf(RunArgs),
    /// Monte-Carlo the forward-variance model and compare with the CGF
    SimulateAfv(RunArgs),
    /// Monte-Carlo the order-flow model and compare with the CGF
    SimulateAfi(RunArgs),
    /// Sweep eps and measure convergence to the high-frequency limit
    HfLimit(RunArgs),
    /// Run the library's invariant audit and print a pass/fail table
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (sectioned `key = value` text)
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV artifacts and the run manifest
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker thread count (falls back to VOLTRA_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl Cmd {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Cmd::Resolvent(a) => (Command::Resolvent, a),
            Cmd::Riccati(a) => (Command::Riccati, a),
            Cmd::Cgf(a) => (Command::Cgf, a),
            Cmd::SimulateAfv(a) => (Command::SimulateAfv, a),
            Cmd::SimulateAfi(a) => (Command::SimulateAfi, a),
            Cmd::HfLimit(a) => (Command::HfLimit, a),
            Cmd::Validate(a) => (Command::Validate, a),
        }
    }
}

fn thread_count(args: &RunArgs) -> Result<Option<usize>> {
    if let Some(n) = args.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        return Ok(Some(n));
    }
    match std::env::var("VOLTRA_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .context("VOLTRA_THREADS: expected a positive integer")?;
            if n == 0 {
                bail!("VOLTRA_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context("reading VOLTRA_THREADS"),
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    let threads = thread_count(args)?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    let (text, cfg) = config::load(&args.config, command)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let outcome = commands::run(&cfg, &args.out)?;
    let manifest = format!("{}.manifest.txt", command.name());
    table::write_manifest(
        &args.out.join(&manifest),
        command.name(),
        threads,
        &outcome.artifacts,
        &outcome.summary,
        &text,
    )?;
    println!("wrote {}", args.out.join(&manifest).display());
    if outcome.failures > 0 {
        bail!(
            "validate: {} of {} checks failed",
            outcome.failures,
            outcome.total_checks
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
