//! `consfield` command-line entry point.
//!
//! Exit codes: 0 success, 1 output write failure, 2 configuration or input
//! error, 3 numerical divergence.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] consfield::Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Core(consfield::Error::Divergence { .. }) => 3,
            CliError::Config(_) | CliError::Core(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "consfield", version, about = "Auto-encoder vector fields: training, curl scans, extraction and energy sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML manifest; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the manifest's `out`, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the manifest. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an auto-encoder and track Jacobian symmetricity.
    Train(Common),
    /// Train on a 2D manifold and track the curl of r(x) - x.
    CurlScan {
        #[command(flatten)]
        common: Common,
        /// Start from these parameters instead of a fresh initialisation.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Fit a conservative field to a linear 2D source field.
    Extract(Common),
    /// Interpolate random and trained parameters and score energy discrimination.
    BetaSweep(Common),
    /// Conservativity report for saved parameters.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
    },
    /// Write a dataset as CSV.
    GenData(Common),
}

fn manifest(common: &Common, name: &str) -> Result<config::Manifest, CliError> {
    config::load(common.config.as_deref(), &common.overrides, common.seed, name)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Train(c) => commands::cmd_train(manifest(&c, "train")?, c.out),
        Command::CurlScan { common, params } => {
            commands::cmd_curl_scan(manifest(&common, "curl-scan")?, common.out, params.as_deref())
        }
        Command::Extract(c) => commands::cmd_extract(manifest(&c, "extract")?, c.out),
        Command::BetaSweep(c) => commands::cmd_beta_sweep(manifest(&c, "beta-sweep")?, c.out),
        Command::Report { common, params } => {
            let (written, json) = commands::cmd_report(manifest(&common, "report")?, common.out, &params)?;
            println!("{json}");
            Ok(written)
        }
        Command::GenData(c) => commands::cmd_gen_data(manifest(&c, "gen-data")?, c.out),
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CONSFIELD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("CONSFIELD_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(written) => {
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
