//! `grtm` command-line front end: simulate -> fit -> predict / eval -> topics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Settings;

#[derive(Parser)]
#[command(
    name = "grtm",
    version,
    about = "Gaussian relational topic model: fit shared-image features and links, predict connections, evaluate against baselines"
)]
struct Cli {
    /// Flat key=value config file; flags override the file, the file
    /// overrides built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic corpus with planted ground truth
    Simulate(SimulateArgs),
    /// Fit the model and write a model file
    Fit(FitArgs),
    /// Rank link candidates for one user
    Predict(PredictArgs),
    /// Split links, score the candidate universe, export ROC/PR report files
    Eval(EvalArgs),
    /// List the most probable images under each topic
    Topics(TopicsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of users
    #[arg(long)]
    users: Option<usize>,
    /// Minimum images per user
    #[arg(long)]
    images_min: Option<usize>,
    /// Maximum images per user
    #[arg(long)]
    images_max: Option<usize>,
    /// Planted topic count
    #[arg(long)]
    k: Option<usize>,
    /// Feature dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Dirichlet concentration of the planted topic proportions
    #[arg(long)]
    alpha: Option<f64>,
    /// Pairwise topic-mean distance in units of sigma
    #[arg(long)]
    separation: Option<f64>,
    /// Per-dimension standard deviation of each topic
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated planted link weights (length K)
    #[arg(long, allow_hyphen_values = true)]
    eta_true: Option<String>,
    /// Planted link intercept
    #[arg(long, allow_negative_numbers = true)]
    nu_true: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for features.bin, links.txt, truth.bin
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Feature file (binary or CSV)
    #[arg(long)]
    features: Option<PathBuf>,
    /// Link file (one `u v` pair per line)
    #[arg(long)]
    links: Option<PathBuf>,
    /// Output model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Topic count
    #[arg(long)]
    k: Option<usize>,
    /// Symmetric Dirichlet concentration
    #[arg(long)]
    alpha: Option<f64>,
    /// Negative-observation regularization
    #[arg(long)]
    rho: Option<f64>,
    /// Covariance form: diag or full
    #[arg(long)]
    cov: Option<String>,
    /// Train on a random fraction of the links and write the split file
    #[arg(long)]
    train_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative ELBO change below which the fit stops
    #[arg(long)]
    tol: Option<f64>,
    /// Initialization: kmeans or random
    #[arg(long)]
    init: Option<String>,
    /// Progress line every N iterations on stderr (0 = silent)
    #[arg(long)]
    log_every: Option<usize>,
    /// Skip storing the per-image responsibilities in the model file
    #[arg(long)]
    omit_phi: bool,
    /// Where to write the split (defaults to `<model>.split`)
    #[arg(long)]
    split_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// User to recommend candidates for
    #[arg(long)]
    user: Option<usize>,
    /// Number of candidates to print
    #[arg(long)]
    top_n: Option<usize>,
    /// Links to exclude from the candidates (typically the training links)
    #[arg(long)]
    links: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file (required for --method grtm)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Feature file (required for the baselines)
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    links: Option<PathBuf>,
    /// Scoring method: grtm, mean, or boft
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    train_ratio: Option<f64>,
    /// Seed for the train/test split (use the fit seed to share its split)
    #[arg(long)]
    seed: Option<u64>,
    /// BoFT cluster count (defaults to the model's K, else 100)
    #[arg(long)]
    k: Option<usize>,
    /// Directory for roc.csv, pr.csv, summary.txt
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Representative images listed per topic
    #[arg(long)]
    per_topic: Option<usize>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    if let Ok(raw) = std::env::var("GRTM_THREADS") {
        let threads: usize = raw
            .parse()
            .with_context(|| format!("GRTM_THREADS must be a positive integer, got {raw:?}"))?;
        if threads == 0 {
            anyhow::bail!("GRTM_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("installing the rayon thread pool")?;
    }

    let cli = Cli::parse();
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(args, &settings),
        Command::Fit(args) => commands::fit(args, &settings),
        Command::Predict(args) => commands::predict(args, &settings),
        Command::Eval(args) => commands::eval(args, &settings),
        Command::Topics(args) => commands::topics(args, &settings),
    }
}
