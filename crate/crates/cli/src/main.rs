use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod knowledge;

#[derive(Parser, Debug)]
#[command(name = "jeek", version, about = "Joint sparse GGM estimation with knowledge weights")]
struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the entry-wise solver.
    #[arg(long, global = true, env = "JEEK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground truth and Gaussian samples.
    Simulate(SimulateArgs),
    /// Estimate the individual and shared precision parts from data.
    Estimate(EstimateArgs),
    /// Score a lambda path against a ground truth.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct SimArgs {
    /// random | cohub | perturbed | brain
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of tasks.
    #[arg(long = "k", short = 'K')]
    pub k: Option<usize>,
    /// Samples per task.
    #[arg(long, short = 'n')]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for the Gaussian draws (default: seed + 1000000).
    #[arg(long)]
    pub sample_seed: Option<u64>,
    #[arg(long)]
    pub hub_fraction: Option<f64>,
    /// CSV distance matrix for the brain protocol.
    #[arg(long)]
    pub distance: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct EstimationArgs {
    /// none | matrix:PATH | file:PATH | cohub:hubs=1,2:gamma=4 | perturbed:... | group:...
    #[arg(long)]
    pub knowledge: Option<String>,
    /// Default gamma for knowledge specs that do not set one.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated threshold candidates (default 0.001, 0.002, ..., 1).
    #[arg(long)]
    pub v_grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// dataset.json, a simulate output directory, or one CSV per task (repeat the flag).
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// truth.json, needed only for hubs=truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub est: EstimationArgs,
    /// Explicit lambda.
    #[arg(long, conflicts_with = "lambda_step")]
    pub lambda: Option<f64>,
    /// Use the i-th value of the default lambda grid (default 30).
    #[arg(long)]
    pub lambda_step: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Directory written by `simulate` (dataset.json + truth.json).
    #[arg(long, conflicts_with_all = ["protocol", "seeds"])]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Number of consecutive seeds to simulate and score.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[command(flatten)]
    pub est: EstimationArgs,
    /// Second knowledge spec; writes paired AUC deltas.
    #[arg(long)]
    pub compare_knowledge: Option<String>,
    /// Comma-separated lambda values.
    #[arg(long, conflicts_with = "lambda_steps")]
    pub lambdas: Option<String>,
    /// Length of the default lambda grid (default 30).
    #[arg(long)]
    pub lambda_steps: Option<usize>,
    /// Magnitude above which an estimated entry counts as an edge.
    #[arg(long)]
    pub edge_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| {
        commands::init_threads(cli.threads.or(file.threads))?;
        match cli.command {
            Command::Simulate(a) => commands::simulate(&a, &file),
            Command::Estimate(a) => commands::estimate(&a, &file),
            Command::Sweep(a) => commands::sweep(&a, &file),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
