//! `jackson-kit`: steady-state analysis, receiver sweeps, model reduction,
//! simulation and line-network checks for open Jackson networks.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jackson_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Output(String),
    #[error("{0}")]
    Usage(String),
    #[error("{count} receiver(s) destabilize the network; flagged rows written")]
    Destabilized { count: usize },
    #[error("closed form deviates from direct inversion by {0:.3e}")]
    LineDeviation(f64),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::Unstable { .. } => 3,
                Error::PerturbationDestabilizes { .. } => 4,
                Error::SingularTailBlock => 5,
                Error::DegenerateDiscriminant { .. } => 6,
                Error::Io { .. }
                | Error::Parse { .. }
                | Error::Invalid(_)
                | Error::QueueOutOfRange { .. }
                | Error::NotDisjoint { .. }
                | Error::NotCovering { .. }
                | Error::EmptyHead
                | Error::EmptyCutset
                | Error::SeparationViolated { .. }
                | Error::TargetNotInHead { .. }
                | Error::SingularSystem { .. }
                | Error::InvalidIncrement(_)
                | Error::InvalidLineParams(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidSimConfig(_) => 2,
                Error::EquivalenceViolated { .. } => 1,
            },
            CliError::Usage(_) => 2,
            CliError::Destabilized { .. } => 4,
            CliError::Csv(_) | CliError::Output(_) | CliError::LineDeviation(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jackson-kit", version, about = "Open Jackson network analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Arrival rates, queue metrics and the contribution matrix.
    Analyze(AnalyzeArgs),
    /// Sweep a unit of extra arrivals over every receiver queue.
    Perturb(PerturbArgs),
    /// Eliminate the tail block, keeping head and cutset queues.
    Reduce(ReduceArgs),
    /// Discrete-event simulation compared against the analytic values.
    Simulate(SimulateArgs),
    /// Closed-form line-network weights against direct inversion.
    LineCheck(LineCheckArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    pub model: PathBuf,
    /// Target queue (1-based).
    #[arg(long)]
    pub target: usize,
    /// Partition as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub partition: String,
    /// Extra exogenous arrival rate applied at each receiver in turn.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    pub model: PathBuf,
    /// Partition as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub partition: String,
    /// Move tail exogenous traffic onto the cutset.
    #[arg(long)]
    pub fold: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    /// Defaults to a tenth of the horizon.
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Record the number in system at this queue (1-based).
    #[arg(long)]
    pub trace: Option<usize>,
    /// Trace sampling interval; defaults to horizon / 1000.
    #[arg(long)]
    pub sample_dt: Option<f64>,
    /// Relative-error tolerance for the pass column of compare.csv.
    #[arg(long, default_value_t = 0.10)]
    pub tolerance: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LineCheckArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub rf: f64,
    #[arg(long)]
    pub rb: f64,
    #[arg(long)]
    pub rl: f64,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Perturb(a) => commands::perturb(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::LineCheck(a) => commands::line_check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
