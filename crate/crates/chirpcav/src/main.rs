use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chirpcav::commands::{self, Command as Cmd, Options};

#[derive(Parser)]
#[command(name = "chirpcav", version, about = "Chirped-pulse orientation control of a molecule in a cavity")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir; default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for scans; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Reserved. Every computation is deterministic, so this is rejected.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the two pulse fields on a time grid.
    Pulse,
    /// First-order Magnus state and its field-free orientation.
    Magnus,
    /// Optimal pulse amplitudes and phases.
    Optimum,
    /// Propagate one pulse pair and report the post-pulse orientation.
    Simulate,
    /// Evaluate a 1-D or 2-D parameter grid.
    Scan,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.seedless {
        eprintln!("error: --seedless is reserved and has no effect on a deterministic run; remove it");
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Command::Pulse => Cmd::Pulse,
        Command::Magnus => Cmd::Magnus,
        Command::Optimum => Cmd::Optimum,
        Command::Simulate => Cmd::Simulate,
        Command::Scan => Cmd::Scan,
    };
    let opts = Options { config: cli.config, out: cli.out, threads: cli.threads };
    match commands::execute(command, &opts) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
