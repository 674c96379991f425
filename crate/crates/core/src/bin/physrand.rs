use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use physrand::harness::{cli_extract, cli_stats, cli_sweep};

#[derive(Parser)]
#[command(name = "physrand", version, about = "Randomness extraction from a weak source and untrusted devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol on a source file. Exit 0 = accept, 2 = reject, 1 = error.
    Extract {
        #[arg(long)]
        config: PathBuf,
    },
    /// Honest-gallery sweep over an (eta, noise) grid, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Advisory statistical tests on a binary file.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Extract { config } => cli_extract(&config),
        Command::Sweep { config, grid } => cli_sweep(&config, &grid),
        Command::Stats { input } => cli_stats(&input),
    };
    ExitCode::from(code as u8)
}
