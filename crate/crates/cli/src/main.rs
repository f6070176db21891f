//! Batch driver exposing the toolkit as reproducible runs with CSV/JSON
//! outputs.
//!
//! Subcommands: `piii solve`, `bianchi evolve`, `lax check`,
//! `lax holonomy`, `ham flow`. Every run is deterministic given its
//! flags/config file; `--seed` only shapes perturbation probes. The
//! `BZPIII_LOG` environment variable (error|info|debug) controls
//! diagnostics on stderr.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 flagged singular
//! termination (with partial output), 64 configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ComplexArg, Span};
use output::Format;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file; exit 64.
    Config(String),
    /// Numeric or I/O failure; exit 1.
    Numeric(String),
}

impl From<bzpiii::Error> for CliError {
    fn from(e: bzpiii::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "bzpiii", version, about = "Bianchi zero-curvature / Painleve III toolkit")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand, Debug)]
enum Group {
    /// Scalar Painleve III runs.
    Piii {
        #[command(subcommand)]
        cmd: PiiiCmd,
    },
    /// Matrix zero-curvature and metric-field runs.
    Bianchi {
        #[command(subcommand)]
        cmd: BianchiCmd,
    },
    /// Linear-system flatness and holonomy probes.
    Lax {
        #[command(subcommand)]
        cmd: LaxCmd,
    },
    /// Hamiltonian flows.
    Ham {
        #[command(subcommand)]
        cmd: HamCmd,
    },
}

#[derive(Subcommand, Debug)]
enum PiiiCmd {
    /// Integrate the (u, tau) equation and tabulate the residual.
    Solve(commands::piii::SolveArgs),
}

#[derive(Subcommand, Debug)]
enum BianchiCmd {
    /// Evolve gamma-hat, assemble the metric and the conformal factor.
    Evolve(commands::bianchi::EvolveArgs),
}

#[derive(Subcommand, Debug)]
enum LaxCmd {
    /// Zero-curvature residuals, rectangle transport and the
    /// vectorization comparison report.
    Check(commands::lax::CheckArgs),
    /// Loop-holonomy traces across base times.
    Holonomy(commands::lax::HolonomyArgs),
}

#[derive(Subcommand, Debug)]
enum HamCmd {
    /// Canonical flow with the energy-law residual and the equivalence
    /// report against the scalar dynamics.
    Flow(commands::ham::FlowArgs),
}

/// Flags shared by every run.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Relative integration tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute integration tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Hard cap on the integrator step size.
    #[arg(long)]
    h_max: Option<f64>,
    /// Primary output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for data tables.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Flat key=value config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for independent sweep units.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("BZPIII_LOG", "error"),
    )
    .format_timestamp(None)
    .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(EXIT_OK);
            }
            eprintln!("{e}");
            std::process::exit(EXIT_CONFIG);
        }
    };

    let outcome = match cli.group {
        Group::Piii { cmd: PiiiCmd::Solve(args) } => commands::piii::run_solve(args),
        Group::Bianchi { cmd: BianchiCmd::Evolve(args) } => commands::bianchi::run_evolve(args),
        Group::Lax { cmd: LaxCmd::Check(args) } => commands::lax::run_check(args),
        Group::Lax { cmd: LaxCmd::Holonomy(args) } => commands::lax::run_holonomy(args),
        Group::Ham { cmd: HamCmd::Flow(args) } => commands::ham::run_flow(args),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(EXIT_CONFIG);
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(EXIT_NUMERIC);
        }
    }
}
