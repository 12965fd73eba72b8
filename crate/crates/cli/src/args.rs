use std::path::PathBuf;

use berhu::checks::Suite;
use berhu::Method;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "berhu",
    version,
    about = "Adaptive BerHu penalized regression with concomitant scale"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one method to a delimited table.
    Fit(FitArgs),
    /// Run the block-correlated Monte Carlo study.
    Simulate(SimulateArgs),
    /// Random-split study on the prostate cancer table.
    Prostate(ProstateArgs),
    /// Run the numerical self-check suites.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Tuning settings shared by the fitting subcommands.
#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    /// Adaptive weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Huber threshold M.
    #[arg(long = "huber-m", default_value_t = berhu::DEFAULT_HUBER_M)]
    pub huber_m: f64,
    /// BerHu threshold L.
    #[arg(long = "berhu-l", default_value_t = berhu::DEFAULT_BERHU_L)]
    pub berhu_l: f64,
    /// Largest lambda of every tuning grid (default: per-method).
    #[arg(long = "grid-max")]
    pub grid_max: Option<f64>,
    /// Number of points of every tuning grid (default: per-method).
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    /// Sweep limit of the solver.
    #[arg(long = "max-sweeps", default_value_t = 10_000)]
    pub max_sweeps: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Delimited table with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated predictor columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,
    /// One of ad-lasso, ridge, ad-en, ad-berhu, their huber- variants, ols, huber.
    #[arg(long, default_value = "ad-berhu", value_parser = parse_method)]
    pub method: Method,
    /// Fixed penalty level; tuned by BIC or cross-validation when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fixed ridge level of the elastic net (with --lambda).
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Seed of the cross-validation folds.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Directory receiving report.json and report.txt.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Standard output format when no --output is given.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Block model 1, 2 or 3.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub model: u8,
    /// Training sample size.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Replications (default 20, or 100 with --full-protocol).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated methods, or `all` for the eight penalized ones.
    #[arg(long, default_value = "all", value_parser = parse_methods)]
    pub methods: MethodList,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Size of the fixed test design used for the prediction error.
    #[arg(long = "test-size", default_value_t = 10_000)]
    pub test_size: usize,
    /// 100 replications and the full tuning grids.
    #[arg(long = "full-protocol")]
    pub full_protocol: bool,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Directory receiving the report and plot summaries.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ProstateArgs {
    /// Prostate table (columns lcavol ... pgg45 and lpsa).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[arg(long = "train-size", default_value_t = 67)]
    pub train_size: usize,
    /// Comma-separated methods; `all` expands to the eight penalized ones.
    #[arg(long, default_value = "ols,huber,all", value_parser = parse_methods)]
    pub methods: MethodList,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Accepted for symmetry with `simulate`; the default grids are already full.
    #[arg(long = "full-protocol")]
    pub full_protocol: bool,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Comma-separated suites: variational, tau, scale, brute-force, grouping.
    #[arg(long, default_value = "all", value_parser = parse_suites)]
    pub suites: SuiteList,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Test hook: deliberately corrupt one computation.
    #[arg(long = "inject-fault", hide = true)]
    pub inject_fault: Option<FaultArg>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    /// Perturb the concomitant tau by a relative 1e-3.
    Tau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodList(pub Vec<Method>);

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteList(pub Vec<Suite>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: berhu::Error| e.to_string())
}

fn parse_methods(s: &str) -> Result<MethodList, String> {
    let mut out = Vec::new();
    for m in Method::parse_list(s).map_err(|e| e.to_string())? {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(MethodList(out))
}

fn parse_suites(s: &str) -> Result<SuiteList, String> {
    let mut out = Vec::new();
    for m in Suite::parse_list(s).map_err(|e| e.to_string())? {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(SuiteList(out))
}
