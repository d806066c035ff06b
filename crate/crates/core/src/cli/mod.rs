//! Command-line front end. `run` parses arguments, executes one subcommand and
//! returns the process exit code: 0 on success, 2 for input or configuration
//! errors, 3 for numerical failures.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{env_of_kind, ConfigFile, ExperimentConfig, SEED_ENV_VAR};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ccpirl", version, about = "CCP-IRL and MaxEnt-IRL on dynamic discrete choice models")]
pub struct Cli {
    /// Worker threads for linear algebra; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an environment and write model.json, true_reward.json, features.csv and config.json.
    GenEnv(GenEnvArgs),
    /// Sample expert demonstrations from the true reward.
    GenExperts(GenExpertsArgs),
    /// Estimate conditional choice probabilities from demonstrations.
    EstimateCcp(EstimateCcpArgs),
    /// Fit a reward with MaxEnt-IRL or CCP-IRL.
    Train(TrainArgs),
    /// Score a checkpoint by held-out NLL and EVD.
    Eval(EvalArgs),
    /// Run a timing suite pairing both algorithms.
    Bench(BenchArgs),
}

/// Flags shared by every run-directory command. Flags override the config.
#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Run directory; defaults to the config's output_dir.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Experiment config; defaults to <dir>/config.json when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GenEnvArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// fixed, macro or objectworld.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub discount: Option<f64>,
    #[arg(long)]
    pub wind: Option<f64>,
    /// Macro-cell region side.
    #[arg(long)]
    pub macro_size: Option<usize>,
    /// Objectworld color count.
    #[arg(long)]
    pub colors: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GenExpertsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_trajectories: Option<usize>,
    #[arg(long)]
    pub traj_length: Option<usize>,
    #[arg(long)]
    pub held_out: Option<usize>,
    /// Replace soft-optimal experts with ε-greedy ones.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EstimateCcpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Additive smoothing pseudo-count.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// maxent or ccp.
    #[arg(long)]
    pub algo: Option<String>,
    /// Total iterations, counting any already in a resumed checkpoint.
    #[arg(long)]
    pub iters: Option<usize>,
    /// linear or mlp.
    #[arg(long)]
    pub reward_model: Option<String>,
    /// Continue from <dir>/checkpoint.json.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Defaults to <dir>/checkpoint.json.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Defaults to <dir>/held_out.json.
    #[arg(long)]
    pub held_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct BenchArgs {
    /// Named suite shipped with the crate.
    #[arg(long, conflicts_with = "suite")]
    pub preset: Option<String>,
    /// Suite JSON file.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Skip the untimed warm-up pass.
    #[arg(long)]
    pub no_warmup: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_SOLVER
    }
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: threads: must be positive");
            return EXIT_INPUT;
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::GenEnv(a) => commands::gen_env(&a),
        Command::GenExperts(a) => commands::gen_experts(&a),
        Command::EstimateCcp(a) => commands::estimate_ccp(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
