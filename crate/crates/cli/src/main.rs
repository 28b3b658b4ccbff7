use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frac_eig_cli::commands::{self, Fault, EXIT_ERROR};
use frac_eig_cli::config::{parse_list, RunConfig};

#[derive(Parser)]
#[command(name = "frac-eig", version, about = "First eigenvalue of the fractional p-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the first eigenpair and write result.json.
    Solve { config: PathBuf },
    /// Run the property suite and write reports/.
    Verify {
        config: PathBuf,
        /// Corrupt the assembled energy (test hook): negate-tails.
        #[arg(long)]
        fault: Option<Fault>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Solve for every (s, p) pair and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Comma-separated orders, e.g. 0.3,0.5,0.7
        #[arg(long = "s", allow_hyphen_values = true)]
        s_list: String,
        /// Comma-separated exponents, e.g. 1.5,2,3
        #[arg(long = "p", allow_hyphen_values = true)]
        p_list: String,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare the solver with the dense eigensolver (p = 2 only).
    Oracle { config: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve { config } => commands::solve(&RunConfig::load(&config)?),
        Command::Verify { config, fault, jobs } => commands::verify(&RunConfig::load(&config)?, fault, jobs),
        Command::Sweep { config, s_list, p_list, jobs } => {
            let cfg = RunConfig::load(&config)?;
            let s = parse_list(&s_list).map_err(|e| anyhow::anyhow!("--s: {e}"))?;
            let p = parse_list(&p_list).map_err(|e| anyhow::anyhow!("--p: {e}"))?;
            commands::sweep(&cfg, &s, &p, jobs)
        }
        Command::Oracle { config } => commands::oracle(&RunConfig::load(&config)?),
    }
}

fn main() -> ExitCode {
    // Usage errors share exit 1 with config errors; 2 and 3 carry results.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("frac-eig: error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
