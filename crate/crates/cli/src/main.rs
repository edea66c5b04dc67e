use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phaseprop::verify::Level;
use phaseprop_cli::{render_checks, simulate, sweep, verify, CliError};

#[derive(Debug, Parser)]
#[command(name = "phaseprop", version, about = "Transport a density with the phase of a double-slit wave function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write data.csv, fringes.csv and metadata.json.
    Simulate {
        /// TOML config; omitted keys (or a missing flag) use the baseline.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One run per sigma_S value, plus summary.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated sigma_S values in nm.
        #[arg(long = "sigma-s-nm", value_delimiter = ',', required = true, num_args = 1..)]
        sigma_s_nm: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Maximum number of concurrent runs.
        #[arg(long)]
        jobs: Option<NonZeroUsize>,
    },
    /// Run the self-checks and print a pass/fail table.
    Verify {
        #[arg(long, default_value = "quick", value_parser = parse_level)]
        level: Level,
    },
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: phaseprop::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let s = simulate(config.as_deref(), &out)?;
            println!(
                "wrote {} (split_depth {:.4}, Born L-inf {:.3e})",
                out.display(),
                s.split_depth,
                s.linf_born_discrepancy
            );
            Ok(())
        }
        Command::Sweep {
            config,
            sigma_s_nm,
            out,
            jobs,
        } => {
            let rows = sweep(config.as_deref(), &sigma_s_nm, &out, jobs)?;
            println!("wrote {} runs under {}", rows.len(), out.display());
            Ok(())
        }
        Command::Verify { level } => {
            let checks = verify(level);
            print!("{}", render_checks(&checks));
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(CliError::Verification(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
