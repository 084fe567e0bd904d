use std::path::PathBuf;

use clap::{Parser, Subcommand};

use gmsolve::cli::{exit_code_for, run_command};
use gmsolve::config::{CommandKind, RunConfig};

/// Batch solver and verification suite for the sign-coupled
/// activator-inhibitor steady-state system.
#[derive(Parser)]
#[command(name = "gmsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenpair of the Neumann operator.
    Eigen(CommonArgs),
    /// Build constants, rectangles and the inequality certificate.
    Certify(CommonArgs),
    /// Positive and negative constant-sign solutions with separation margins.
    SolveSign(CommonArgs),
    /// Regularized continuation toward a sign-synchronized nodal candidate.
    SolveNodal(CommonArgs),
    /// Degree estimates and the exact no-solution identity on coarse grids.
    Degree(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the INI-style run configuration.
    config: PathBuf,
    /// Output directory (default: the config's [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging() {
    let level = match std::env::var("GM_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn main() {
    init_logging();
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Eigen(a) => (CommandKind::Eigen, a),
        Command::Certify(a) => (CommandKind::Certify, a),
        Command::SolveSign(a) => (CommandKind::SolveSign, a),
        Command::SolveNodal(a) => (CommandKind::SolveNodal, a),
        Command::Degree(a) => (CommandKind::Degree, a),
    };

    let config = match RunConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            std::process::exit(1);
        }
    };
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));

    match run_command(kind, &config, &out_dir) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
