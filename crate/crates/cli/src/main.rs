//! `gopa` command-line front end.

mod elicit;
mod output;
mod sensitivity;
mod solve;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gopa::elicit_continuous::{BoundMode, Orientation};
use gopa::pipeline::PipelineOptions;
use gopa::GopaError;

#[derive(Parser, Debug)]
#[command(name = "gopa", version, about = "Group decision weights from ordinal rankings and partial preferences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Elicit utilities for every cell and solve for the weights.
    Solve(SolveArgs),
    /// Solve from the rankings alone (ROC utilities, contexts ignored).
    Opa(SolveArgs),
    /// Elicit utilities only.
    Elicit(ElicitArgs),
    /// Consensus statistics for a solved report or an input document.
    Metrics(MetricsArgs),
    /// Re-solve under permutations of the expert ranks.
    Sensitivity(SensitivityArgs),
    /// Compare the closed-form optimum with the simplex on random instances.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input document (JSON).
    pub input: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Emit floats unrounded.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Pipeline {
    /// How continuous densities are mapped to per-rank utilities.
    #[arg(long, value_enum, default_value_t = OrientationArg::Reversed)]
    pub orientation: OrientationArg,
    /// Whether lower-bound entries of continuous cells are equalities.
    #[arg(long, value_enum, default_value_t = BoundModeArg::Equality)]
    pub bound_mode: BoundModeArg,
}

impl Pipeline {
    pub fn options(self) -> PipelineOptions {
        PipelineOptions {
            orientation: match self.orientation {
                OrientationArg::Reversed => Orientation::Reversed,
                OrientationArg::Literal => Orientation::Literal,
            },
            bound_mode: match self.bound_mode {
                BoundModeArg::Equality => BoundMode::Equality,
                BoundModeArg::Inequality => BoundMode::Inequality,
            },
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationArg {
    Reversed,
    Literal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundModeArg {
    Equality,
    Inequality,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: Pipeline,
    /// Also write weights.csv, utilities.csv and metrics.csv into this directory.
    #[arg(long, value_name = "DIR")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ElicitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: Pipeline,
    /// Restrict to one cell, `EXPERT,ATTRIBUTE` by id or 1-based index.
    #[arg(long, value_name = "EXPERT,ATTRIBUTE")]
    pub cell: Option<String>,
    /// Include the target structure next to the elicited utilities.
    #[arg(long)]
    pub dump_target: bool,
    /// Also write utilities.csv into this directory.
    #[arg(long, value_name = "DIR")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: Pipeline,
    /// Also write metrics.csv into this directory.
    #[arg(long, value_name = "DIR")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: Pipeline,
    /// Draw this many random expert orders instead of all permutations.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the per-scenario weights in the report.
    #[arg(long)]
    pub scenarios: bool,
    /// Also write sensitivity.csv into this directory.
    #[arg(long, value_name = "DIR")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Optional input document checked alongside the random instances.
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub pipeline: Pipeline,
    /// Number of random instances.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted gap between the closed form and the simplex.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// Process exit code for an error chain.
fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<GopaError>()) else {
        return 1;
    };
    match e.root() {
        GopaError::Validation { .. }
        | GopaError::EmptyCell { .. }
        | GopaError::ContextRange { .. }
        | GopaError::DuplicateConstraint { .. }
        | GopaError::Sign { .. }
        | GopaError::Domain(_)
        | GopaError::UtilityShape { .. }
        | GopaError::Dimension(_)
        | GopaError::Shape(_)
        | GopaError::TooManyExperts(_)
        | GopaError::SampleSize(_) => 2,
        GopaError::InfeasibleContext(_) | GopaError::InfeasibleStage2(_) => 3,
        GopaError::NumericFailure(_) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(args) => solve::solve(&args, false),
        Command::Opa(args) => solve::solve(&args, true),
        Command::Elicit(args) => elicit::run(&args),
        Command::Metrics(args) => solve::metrics(&args),
        Command::Sensitivity(args) => sensitivity::run(&args),
        Command::Verify(args) => verify::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
