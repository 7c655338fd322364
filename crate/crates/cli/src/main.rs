mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use bcmlr::ScaleOrder;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BCMLR_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bcmlr", version, about = "Bayesian multiple changepoint detection with a multinomial-logistic loss")]
pub struct Cli {
    /// Flat key = value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for replicates and tempering (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario series and its true changepoints.
    Simulate(SimulateArgs),
    /// Fit a known number of changepoints.
    Fit(FitArgs),
    /// Choose the number of changepoints from held-out discrimination.
    Select(SelectArgs),
    /// Run the synthetic benchmark.
    Bench(BenchArgs),
    /// Summarize a saved draw file.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Gaussian,
    Horseshoe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedArg {
    Poly2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DrawFormat {
    Csv,
    Binary,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing). Defaults to $BCMLR_OUT_DIR, then the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// cim, cic or cimc.
    #[arg(long)]
    pub scenario: Option<String>,
    /// low or high.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Series length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated true changepoints.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<usize>>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Input CSV, one row per time point.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    /// Gaussian prior variance.
    #[arg(long)]
    pub prior_var: Option<f64>,
    /// Apply the degree-2 polynomial embedding before fitting.
    #[arg(long, value_enum)]
    pub embed: Option<EmbedArg>,
    /// Center and scale every column.
    #[arg(long)]
    pub standardize: bool,
    /// With both --embed and --standardize: after-embedding (default) or
    /// before-embedding.
    #[arg(long)]
    pub scale_order: Option<ScaleOrder>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Defaults to half the iterations.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub min_seg: Option<usize>,
    /// Use a uniform prior over changepoint locations.
    #[arg(long)]
    pub uniform_kappa_prior: bool,
    /// Credible level parameter: intervals cover 1 - gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub draws_format: Option<DrawFormat>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub num_changepoints: Option<usize>,
    /// Parallel tempering with this many powers.
    #[arg(long)]
    pub temper: Option<usize>,
    /// Lowest tempering power.
    #[arg(long)]
    pub temper_min: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub l_fitted: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Hold out every zeta-th row.
    #[arg(long)]
    pub zeta: Option<usize>,
    /// Refit all rows with the selected number of changepoints.
    #[arg(long)]
    pub refit: bool,
    /// Bootstrap resamples; DeLong intervals when omitted.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Score every row of the neighboring segments, not only held-out rows.
    #[arg(long)]
    pub score_all_rows: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    /// low or high; both when omitted.
    #[arg(long)]
    pub variant: Option<String>,
    /// Every scenario and variant.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Only the known-L pipeline.
    #[arg(long, conflicts_with = "unknown_l")]
    pub known_l: bool,
    /// Only the unknown-L pipeline.
    #[arg(long)]
    pub unknown_l: bool,
    /// Skip raw input for scenarios that are embedded.
    #[arg(long)]
    pub embedded_only: bool,
    /// Standardize the series before-embedding (default) or after-embedding.
    #[arg(long)]
    pub scale_order: Option<ScaleOrder>,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub min_seg: Option<usize>,
    #[arg(long)]
    pub l_fitted: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub zeta: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Draw file (CSV or binary).
    #[arg(long)]
    pub draws: PathBuf,
    /// Data the draws were fit on.
    #[arg(long)]
    pub data: PathBuf,
    /// Repeat the embedding used at fit time.
    #[arg(long, value_enum)]
    pub embed: Option<EmbedArg>,
    /// Repeat the scaling used at fit time.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub scale_order: Option<ScaleOrder>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => config::ConfigFile::load(path)?,
        None => config::ConfigFile::default(),
    };
    let threads = config::resolve_opt(cli.threads, &file, "threads")?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, &file),
        Command::Fit(a) => commands::fit(a, &file),
        Command::Select(a) => commands::select(a, &file),
        Command::Bench(a) => commands::bench(a, &file),
        Command::Summarize(a) => commands::summarize(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
