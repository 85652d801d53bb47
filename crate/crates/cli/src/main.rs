//! Command-line surface: data ingestion with zero replacement, model
//! fitting, residual computation, envelope plots, and the simulation
//! studies. Every command is a pure function of (input files, flags,
//! seed); outputs are written atomically.

mod artifact;
mod commands;
mod io;
mod preprocess;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "compresid",
    version,
    about = "Dirichlet regression and bootstrap residual diagnostics for compositional data"
)]
struct Cli {
    /// Worker threads for the data-parallel stages (default: all cores).
    /// Results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Dirichlet regression model and write a model artifact.
    Fit(FitArgs),
    /// Compute one residual kind for a fitted model.
    Residuals(ResidualsArgs),
    /// Normal probability plot with simulated envelope.
    Envelope(EnvelopeArgs),
    /// Monte Carlo scenario study (distributional summary table).
    Simulate(SimulateArgs),
    /// Envelope calibration and mixture misspecification power study.
    Power(PowerArgs),
    /// Likelihood-ratio test between two fitted model artifacts.
    Lrtest(LrtestArgs),
}

#[derive(Args)]
pub(crate) struct DataArgs {
    /// Input CSV (header row required, decimal point only).
    #[arg(long)]
    pub(crate) data: std::path::PathBuf,
    /// Names of the component (proportion) columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub(crate) components: Vec<String>,
    /// Replacement value for zero components.
    #[arg(long, default_value_t = 0.001)]
    pub(crate) zero_epsilon: f64,
    /// Largest tolerated fraction of rows containing zeros.
    #[arg(long, default_value_t = 0.1)]
    pub(crate) max_zero_fraction: f64,
}

#[derive(Args)]
pub(crate) struct FitArgs {
    #[command(flatten)]
    pub(crate) data: DataArgs,
    /// Covariates of every mean submodel (intercepts always included).
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub(crate) mean_cov: Vec<String>,
    /// Covariates of the precision submodel.
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub(crate) prec_cov: Vec<String>,
    /// Reference component (default: first listed component).
    #[arg(long)]
    pub(crate) reference: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub(crate) max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub(crate) tol: f64,
    /// Output model artifact (JSON).
    #[arg(long)]
    pub(crate) out: std::path::PathBuf,
}

#[derive(Args)]
pub(crate) struct ResidualsArgs {
    /// Model artifact from `fit`.
    #[arg(long)]
    pub(crate) model: std::path::PathBuf,
    #[command(flatten)]
    pub(crate) data: DataArgs,
    /// a1 | q1 | a2 | q2 | pearson | compq
    #[arg(long)]
    pub(crate) kind: String,
    /// Bootstrap replicates for the class residuals.
    #[arg(long, default_value_t = 1000)]
    pub(crate) b: usize,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    #[arg(long, default_value_t = 20)]
    pub(crate) retries: usize,
    #[arg(long)]
    pub(crate) out: std::path::PathBuf,
}

#[derive(Args)]
pub(crate) struct EnvelopeArgs {
    #[arg(long)]
    pub(crate) model: std::path::PathBuf,
    #[command(flatten)]
    pub(crate) data: DataArgs,
    #[arg(long)]
    pub(crate) kind: String,
    /// Envelope simulations.
    #[arg(long, default_value_t = 100)]
    pub(crate) r: usize,
    #[arg(long, default_value_t = 1000)]
    pub(crate) b: usize,
    /// Inner bootstrap size inside the envelope simulations (default: B).
    #[arg(long)]
    pub(crate) b_inner: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// Output plot.
    #[arg(long)]
    pub(crate) svg: std::path::PathBuf,
    /// Output band data.
    #[arg(long)]
    pub(crate) csv: std::path::PathBuf,
    /// Detection threshold; prints a verdict when given.
    #[arg(long)]
    pub(crate) v: Option<f64>,
}

#[derive(Args)]
pub(crate) struct SimulateArgs {
    /// Scenario id: 1a..5a or 1b..5b.
    #[arg(long)]
    pub(crate) scenario: String,
    #[arg(long, default_value_t = 20)]
    pub(crate) n: usize,
    /// Monte Carlo replicates (default 500, or 2000 with --paper-scale).
    #[arg(long)]
    pub(crate) replicates: Option<usize>,
    /// Bootstrap size (default 200, or 1000 with --paper-scale).
    #[arg(long)]
    pub(crate) b: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// Use the full-scale defaults (2000 replicates, B = 1000).
    #[arg(long)]
    pub(crate) paper_scale: bool,
    #[arg(long)]
    pub(crate) out: std::path::PathBuf,
}

#[derive(Args)]
pub(crate) struct PowerArgs {
    #[arg(long, default_value_t = 200)]
    pub(crate) g_correct: usize,
    #[arg(long, default_value_t = 100)]
    pub(crate) g_wrong: usize,
    #[arg(long, default_value_t = 50)]
    pub(crate) n: usize,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    #[arg(long, default_value_t = 100)]
    pub(crate) r: usize,
    #[arg(long, default_value_t = 200)]
    pub(crate) b: usize,
    #[arg(long, default_value_t = 100)]
    pub(crate) b_inner: usize,
    #[arg(long)]
    pub(crate) out: std::path::PathBuf,
}

#[derive(Args)]
pub(crate) struct LrtestArgs {
    /// Artifact of the full model.
    #[arg(long)]
    pub(crate) full: std::path::PathBuf,
    /// Artifact of the nested (reduced) model.
    #[arg(long)]
    pub(crate) reduced: std::path::PathBuf,
}

/// CLI-level error with its process exit code.
pub(crate) struct CliError {
    pub code: u8,
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            category: "usage",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            category: "data",
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            category: "numerical",
            message: message.into(),
        }
    }
}

impl From<compresid::Error> for CliError {
    fn from(e: compresid::Error) -> Self {
        use compresid::Error as E;
        match &e {
            E::InvalidRow { .. } | E::Dimension(_) | E::Io(_) => Self::data(e.to_string()),
            E::InvalidArgument(_) => Self::usage(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: usage: could not configure {threads} threads: {e}");
            return std::process::ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Residuals(args) => commands::residuals(&args),
        Command::Envelope(args) => commands::envelope(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Power(args) => commands::power(&args),
        Command::Lrtest(args) => commands::lrtest(&args),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.category, e.message);
            std::process::ExitCode::from(e.code)
        }
    }
}
