use clap::{Parser, Subcommand};
use nozzleflow::cli::{execute, Command};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "nozzleflow",
    about = "Viscous nozzle flow solver and verification toolkit",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Validate the nozzle profile against the admissibility comparison.
    CheckGeometry { config: PathBuf },
    /// Integrate one viscous run and record invariant-region monitors.
    Run { config: PathBuf },
    /// Test entropy residuals and the dissipation integral on one run.
    EntropyAudit { config: PathBuf },
    /// Exercise the sign-preservation lab on a scenario corpus.
    MaxPrinciple { config: PathBuf },
    /// Refine the viscosity and measure Cauchy contraction.
    Sweep { config: PathBuf },
}

fn main() {
    let args = Args::parse();
    let (cmd, path) = match args.command {
        Sub::CheckGeometry { config } => (Command::CheckGeometry, config),
        Sub::Run { config } => (Command::Run, config),
        Sub::EntropyAudit { config } => (Command::EntropyAudit, config),
        Sub::MaxPrinciple { config } => (Command::MaxPrinciple, config),
        Sub::Sweep { config } => (Command::Sweep, config),
    };
    std::process::exit(execute(cmd, &path));
}
