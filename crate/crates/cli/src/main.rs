//! Experiment harness for full-field elastic parameter recovery.
//!
//! One JSON config describes a run; subcommands chain the pipeline stages:
//! `generate` makes reference data, `train` fits a network to it, `sweep`
//! compares architectures, `invert-fea` runs the adjoint baseline,
//! `delentropy` scores field complexity, and `report` renders plots.

mod commands;
mod config;
mod manifest;
mod raster;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elastmap_core::Error;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "elastmap",
    version,
    about = "Full-field modulus recovery experiments",
    arg_required_else_help = true
)]
struct Cli {
    /// JSON experiment config; built-in desk-scale defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Publication-scale mesh and iteration counts (grid 50, 500k iterations).
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Override one config key, e.g. --set pinn.iterations=1000. Repeatable;
    /// applied after --paper-scale.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a modulus map, solve the forward model, write reference data.
    Generate,
    /// Train a network against a strain reference.
    Train {
        /// Reference solution CSV from `generate`.
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
        /// Ground-truth elemental modulus CSV, for error reporting.
        #[arg(long, value_name = "FILE")]
        truth_modulus: Option<PathBuf>,
        /// Noise-free solution CSV, for displacement/strain error reporting.
        #[arg(long, value_name = "FILE")]
        truth_solution: Option<PathBuf>,
    },
    /// Train every architecture combination over several seeds and tabulate.
    Sweep {
        /// Comma-separated codes like IIB,IVA; all 20 combinations when omitted.
        #[arg(long, value_name = "CODES")]
        archs: Option<String>,
        /// Number of seeds per architecture (seeds 1..=k).
        #[arg(long, default_value_t = 1, value_name = "K")]
        seeds: usize,
    },
    /// Recover the modulus with the adjoint solver instead of a network.
    InvertFea {
        /// Reference solution CSV from `generate`.
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
        /// Ground-truth elemental modulus CSV, for error reporting.
        #[arg(long, value_name = "FILE")]
        truth_modulus: Option<PathBuf>,
    },
    /// Gradient-histogram entropy of an image or a lattice field CSV.
    Delentropy {
        /// Grayscale image (PNG or PGM).
        #[arg(long, value_name = "FILE", conflicts_with = "field")]
        image: Option<PathBuf>,
        /// Field CSV on a full rectangular lattice, e.g. intensity_grid.csv.
        #[arg(long, value_name = "FILE")]
        field: Option<PathBuf>,
        /// Also write the occupied histogram bins as a CSV.
        #[arg(long, value_name = "FILE")]
        histogram: Option<PathBuf>,
    },
    /// Render convergence curves and field maps for a run directory.
    Report {
        /// Run directory; defaults to output.directory from the config.
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successes; anything else is a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: Cli) -> elastmap_core::Result<()> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), cli.paper_scale, &cli.sets)?;
    match cli.command {
        Command::Generate => commands::generate::run(&cfg),
        Command::Train {
            reference,
            truth_modulus,
            truth_solution,
        } => commands::train::run(
            &cfg,
            &commands::train::TrainArgs {
                reference,
                truth_modulus,
                truth_solution,
            },
        ),
        Command::Sweep { archs, seeds } => {
            commands::sweep::run(&cfg, &commands::sweep::SweepArgs { archs, seeds })
        }
        Command::InvertFea {
            reference,
            truth_modulus,
        } => commands::invert_fea::run(
            &cfg,
            &commands::invert_fea::InvertArgs {
                reference,
                truth_modulus,
            },
        ),
        Command::Delentropy {
            image,
            field,
            histogram,
        } => commands::delentropy::run(
            &cfg,
            &commands::delentropy::DelentropyArgs {
                image,
                field,
                histogram,
            },
        ),
        Command::Report { run } => commands::report::run(&cfg, &commands::report::ReportArgs { run }),
    }
}

/// 0 success, 1 config/usage error, 2 solver or training failure, 3 I/O.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Format(_) => 1,
        Error::SolverFailure { .. }
        | Error::TrainingAborted { .. }
        | Error::Numerical(_)
        | Error::DegenerateInput(_)
        | Error::Domain(_) => 2,
        Error::Io(_) => 3,
    }
}
