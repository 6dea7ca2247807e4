use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use permnqs_cli::commands;
use permnqs_cli::config::{extract_overrides, ExperimentConfig};
use permnqs_cli::CliError;

/// Permutation-invariant neural quantum states for the transverse-field
/// Ising ring.
///
/// Any config field can be overridden with `--section.key=value`, for
/// example `--model.L=14` or `--sampler.mode=metropolis`.
#[derive(Debug, Parser)]
#[command(name = "permnqs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the ansatz with stochastic reconfiguration.
    Train(Args),
    /// Exact ground-state energies.
    Ed(Args),
    /// Closed-form product-state quantities.
    Analytic(Args),
    /// Fluctuation density over an (alpha, L) grid.
    ScanFluctuations(Args),
    /// Time exact-full, exact-sector and Metropolis energy evaluation.
    Bench(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// TOML config, or a previous run's meta.json. Defaults apply when omitted.
    config: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Ed(_) => "ed",
            Command::Analytic(_) => "analytic",
            Command::ScanFluctuations(_) => "scan-fluctuations",
            Command::Bench(_) => "bench",
        }
    }

    fn args(&self) -> &Args {
        match self {
            Command::Train(a)
            | Command::Ed(a)
            | Command::Analytic(a)
            | Command::ScanFluctuations(a)
            | Command::Bench(a) => a,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let raw: Vec<String> = std::env::args().collect();
    let (rest, overrides) = match extract_overrides(raw) {
        Ok(split) => split,
        Err(e) => return fail("permnqs", &e),
    };
    let cli = Cli::parse_from(rest);
    let name = cli.command.name();
    let cfg = match ExperimentConfig::load(cli.command.args().config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => return fail(name, &e),
    };
    let result = match cli.command {
        Command::Train(_) => commands::run_train(&cfg),
        Command::Ed(_) => commands::run_ed(&cfg),
        Command::Analytic(_) => commands::run_analytic(&cfg),
        Command::ScanFluctuations(_) => commands::run_scan_fluctuations(&cfg),
        Command::Bench(_) => commands::run_bench(&cfg),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(name, &e),
    }
}

fn fail(subcommand: &str, e: &CliError) -> ExitCode {
    eprintln!("permnqs {subcommand}: error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
