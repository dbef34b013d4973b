//! Command-line driver: identity verification, protocol simulation, attack
//! analysis, and bound calibration from JSON configs.
//!
//! Exit codes: 0 success, 1 check failed, 2 bad config, 3 dimension error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qkdlab",
    version,
    about = "Spider-calculus verification and key-distribution simulation lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config document for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the output path from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the spider identities over a list of dimensions.
    VerifySpiders,
    /// Run one seeded protocol execution and emit the run record.
    Simulate,
    /// Analyze an eavesdropping channel: disturbance, gap, proof replay.
    AnalyzeAttack,
    /// Produce the noise-bound calibration artifact.
    Calibrate,
}

fn main() {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config <PATH> is required");
        std::process::exit(2);
    };
    let result = match cli.command {
        Command::VerifySpiders => commands::cmd_verify_spiders(&config, cli.out, cli.quiet),
        Command::Simulate => commands::cmd_simulate(&config, cli.out, cli.seed, cli.quiet),
        Command::AnalyzeAttack => commands::cmd_analyze_attack(&config, cli.out, cli.seed, cli.quiet),
        Command::Calibrate => commands::cmd_calibrate(&config, cli.out, cli.seed, cli.quiet),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
