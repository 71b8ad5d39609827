//! Command-line front end for the faintprint toolkit.
//!
//! Data goes to stdout (JSON or CSV), diagnostics go to stderr, and exit
//! codes are stable: 0 success, 1 input problem, 2 degenerate signal,
//! 3 internal failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faintprint::config::RunConfig;
use faintprint::pipeline::configure_jobs;

mod commands;
mod corpus;
mod exit;

#[derive(Parser)]
#[command(
    name = "faintprint",
    version,
    about = "Faint-signal forensic fingerprints for face-video authenticity analysis"
)]
struct Cli {
    /// Configuration file (.toml or .json); built-in defaults apply when
    /// omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed, overriding the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, overriding the configuration file (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic corpus of labeled pulse videos.
    Synthesize(commands::synthesize::Args),
    /// Extract both fingerprint kinds from one video and write map files.
    Extract(commands::extract::ExtractArgs),
    /// Extract autoregression fingerprints, optionally dumping raw
    /// per-frame coefficients as CSV.
    ExtractAr(commands::extract::ExtractArArgs),
    /// Estimate the subject's heart rate from one video.
    EstimateHr(commands::hr::Args),
    /// Build fingerprint maps with explicit kind and window control.
    Fingerprint(commands::extract::FingerprintArgs),
    /// Train the two-branch classifier on a labeled fingerprint corpus.
    Train(commands::train::Args),
    /// Score fingerprint maps with trained models.
    Classify(commands::classify::Args),
    /// Evaluate trained models on a labeled fingerprint corpus.
    Eval(commands::eval::Args),
    /// Train and evaluate the autoregression branch across model orders.
    OrderSweep(commands::sweep::Args),
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli)?;
    configure_jobs(config.jobs)?;
    match cli.command {
        Command::Synthesize(args) => commands::synthesize::run(&args, &config),
        Command::Extract(args) => commands::extract::run_extract(&args, &config),
        Command::ExtractAr(args) => commands::extract::run_extract_ar(&args, &config),
        Command::EstimateHr(args) => commands::hr::run(&args, &config),
        Command::Fingerprint(args) => commands::extract::run_fingerprint(&args, &config),
        Command::Train(args) => commands::train::run(&args, &config),
        Command::Classify(args) => commands::classify::run(&args, &config),
        Command::Eval(args) => commands::eval::run(&args, &config),
        Command::OrderSweep(args) => commands::sweep::run(&args, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; everything else is
            // an input problem.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render(&err));
            ExitCode::from(exit::code_for(&err))
        }
    }
}

/// Joins the error chain with ": ", skipping causes whose message the
/// previous link already embeds (the library errors print their own causes).
fn render(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&msg)) {
            continue;
        }
        parts.push(msg);
    }
    parts.join(": ")
}
