use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modbohm::qcorr::{Convention, QbarMode};
use modbohm_cli::commands;
use modbohm_cli::identities::{IdentityOptions, Status};
use modbohm_cli::CliError;

#[derive(Parser)]
#[command(name = "modbohm", version, about = "Modified Bohmian dynamics driven by a functional field")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write a bundle.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the trajectory seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run standard and modified evolution side by side.
    CompareModes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in identity and gradient suite.
    CheckIdentities {
        #[arg(long, value_enum, default_value = "exact")]
        convention: ConventionArg,
        #[arg(long, value_enum, default_value = "anticommutator")]
        qbar_mode: QbarArg,
        /// Functional grid points per axis.
        #[arg(long, default_value_t = modbohm_cli::identities::DEFAULT_POINTS)]
        points: usize,
    },
    /// Export plot-ready CSV files from a bundle.
    Report {
        bundle: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConventionArg {
    Exact,
    AsPrinted,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum QbarArg {
    Anticommutator,
    Direct,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let (dir, output) = commands::simulate(&config, out.as_deref(), seed)?;
            if !quiet {
                let last = output.series.last().expect("at least one output row");
                println!(
                    "{} outputs, final t = {}, norm = {:.12}, survival = {:.12} -> {}",
                    output.series.len(),
                    last.t,
                    last.norm,
                    last.survival_norm,
                    dir.display()
                );
            }
        }
        Command::CompareModes { config, out, seed } => {
            let (dir, cmp) = commands::compare(&config, out.as_deref(), seed)?;
            if !quiet {
                println!("{:>12} {:>14} {:>14}", "t", "|psi diff|", "rms dQ");
                for r in &cmp.fields {
                    println!("{:>12.6} {:>14.6e} {:>14.6e}", r.t, r.psi_distance, r.q_rms_difference.unwrap_or(f64::NAN));
                }
                if let Some(d) = cmp.displacement.last() {
                    println!("trajectory displacement at t = {}: mean {:.6e}, max {:.6e}", d.t, d.mean, d.max);
                }
                println!("-> {}", dir.display());
            }
        }
        Command::CheckIdentities {
            convention,
            qbar_mode,
            points,
        } => {
            let opts = IdentityOptions {
                convention: match convention {
                    ConventionArg::Exact => Convention::Exact,
                    ConventionArg::AsPrinted => Convention::AsPrinted,
                },
                qbar_mode: match qbar_mode {
                    QbarArg::Anticommutator => QbarMode::Anticommutator,
                    QbarArg::Direct => QbarMode::Direct,
                },
                points,
                ..IdentityOptions::default()
            };
            let report = commands::identities(&opts)?;
            for c in &report.checks {
                if !quiet || c.status == Status::Fail {
                    println!("{c}");
                }
            }
            let failed = report.failed();
            if failed > 0 {
                return Err(CliError::Identity { failed });
            }
        }
        Command::Report { bundle, out } => {
            let files = commands::export(&bundle, out.as_deref())?;
            if !quiet {
                println!("{} files -> {}", files.files.len(), files.dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
