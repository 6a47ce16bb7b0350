//! Deterministic experiment runner: each subcommand reads one sectioned
//! config, runs an experiment from the core crate, writes `summary.json`
//! (plus per-command CSV tables) into the output directory, and exits 0
//! exactly when every asserted check passed.

mod checks;
mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes that decide the exit code: configuration problems exit
/// 2, aborted runs exit 1. Failed checks are not errors; they surface as
/// `passed = false` in the summary and exit code 1 with artifacts intact.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<kgmp_core::Error> for CliError {
    fn from(e: kgmp_core::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "kgmp",
    version,
    about = "Klein-Gordon-Maxwell-Proca experiments on closed 4-manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one saddle search and write the solution pair.
    Solve(RunArgs),
    /// Saddle searches across a grid of phases omega.
    Sweep(RunArgs),
    /// Warm-started continuation along an increasing exponent list.
    Continuation(RunArgs),
    /// Finite-difference verification of the analytic derivatives.
    Gradcheck(RunArgs),
    /// Flat-space bubble identity and integral checks.
    #[command(name = "bubble-check")]
    BubbleCheck(RunArgs),
    /// Quotient expansion over concentrating test functions.
    Expansion(RunArgs),
    /// Closed-form constants and the variational Sobolev estimate.
    Constants(RunArgs),
    /// Exact degenerate constant family near the phase boundary.
    Degenerate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: experiment.out_dir from the config, else `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed from [solver].
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Continuation(a) => ("continuation", a),
        Command::Gradcheck(a) => ("gradcheck", a),
        Command::BubbleCheck(a) => ("bubble-check", a),
        Command::Expansion(a) => ("expansion", a),
        Command::Constants(a) => ("constants", a),
        Command::Degenerate(a) => ("degenerate", a),
    };
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(name: &'static str, args: &RunArgs) -> Result<bool, CliError> {
    let cfg = config::load(&args.config, args.seed)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.experiment.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", out_dir.display())))?;

    let ctx = commands::Ctx {
        cfg,
        out_dir,
        command: name,
    };
    let rep = match name {
        "solve" => commands::solve(&ctx)?,
        "sweep" => commands::sweep(&ctx)?,
        "continuation" => commands::continuation(&ctx)?,
        "gradcheck" => checks::gradcheck(&ctx)?,
        "bubble-check" => checks::bubble_check(&ctx)?,
        "expansion" => checks::expansion(&ctx)?,
        "constants" => checks::constants(&ctx)?,
        "degenerate" => checks::degenerate(&ctx)?,
        _ => unreachable!("unknown command {name}"),
    };
    let summary = rep.into_summary(name, ctx.cfg.echo());
    let path = report::write_summary(&ctx.out_dir, &summary)?;
    for check in &summary.checks {
        let mark = if check.passed { "ok  " } else { "FAIL" };
        println!("{mark} {name}: {} ({})", check.name, check.detail);
    }
    println!("wrote {}", path.display());
    Ok(summary.passed)
}

/// `KGMP_THREADS` caps the worker pool used by sweep rows; every other
/// subcommand is single-threaded regardless.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("KGMP_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring KGMP_THREADS = `{v}`"),
        }
    }
}
