//! Command-line runner for null-model simulations, theory checks and
//! five-arm replay experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use qnet_core::experiment::ExperimentError;

pub mod commands;
pub mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Experiment(ExperimentError),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(msg) => CliError::Config(msg),
            ExperimentError::NullModel(e) => CliError::Config(e.to_string()),
            other => CliError::Experiment(other),
        }
    }
}

/// What a successful command concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    ChecksFailed,
}

#[derive(Debug, Parser)]
#[command(name = "qnet", version, about = "Growing question network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the null growth model and compare with theory curves.
    NullSim(NullSimArgs),
    /// Check simulated growth, answer density and degree laws against theory.
    TheoryCheck(TheoryCheckArgs),
    /// Replay the five question-selection arms over ER or BA graphs.
    Exp1(Exp1Args),
}

#[derive(Debug, Clone, Args)]
pub struct SharedArgs {
    /// Base seed; replicate i uses a seed derived from (seed, i).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short = 'r', long)]
    pub replicates: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Worker threads; 0 uses every core. Never changes results.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NullArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of steps.
    #[arg(short = 'T', long = "steps")]
    pub steps: Option<u64>,
    /// Probability that a simulated answer is 'yes'.
    #[arg(long)]
    pub answer_p: Option<f64>,
    /// random | looping | thompson-phi | thompson-phi-n | binomial[:p_min=..,max_answers=..]
    #[arg(long)]
    pub policy: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct NullSimArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(flatten)]
    pub model: NullArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryCheckArgs {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(flatten)]
    pub model: NullArgs,
    /// Override a tolerance: growth|density|collapse|slope|all=VALUE. Repeatable.
    #[arg(long = "tolerance", value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct Exp1Args {
    #[command(flatten)]
    pub shared: SharedArgs,
    /// Underlying graph family: er | ba.
    #[arg(long)]
    pub graph: Option<String>,
    /// Nodes in the underlying graph.
    #[arg(short = 'n', long)]
    pub nodes: Option<usize>,
    /// Edges in the underlying graph; must equal the dataset's question count.
    #[arg(short = 'm', long)]
    pub edges: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(short = 'T', long = "steps")]
    pub steps: Option<u64>,
    /// Tab-separated `question_id n_yes n_total`; a synthetic set is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub binomial_p_min: Option<f64>,
    #[arg(long)]
    pub binomial_max_answers: Option<u64>,
    /// pooled | two-stage
    #[arg(long)]
    pub neighbor_choice: Option<String>,
    /// Rollbacks allowed per step before it completes as answer-only.
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Rejection budget for connected ER sampling.
    #[arg(long)]
    pub er_max_retries: Option<u32>,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::NullSim(a) => commands::null_sim(&a),
        Command::TheoryCheck(a) => commands::theory_check(&a),
        Command::Exp1(a) => commands::exp1(&a),
    }
}

/// Exit codes: 0 success, 1 failed checks, 2 configuration, input or I/O error.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qnet: {e}");
            ExitCode::from(2)
        }
    }
}
