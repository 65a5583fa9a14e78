//! Command-line front end: `simulate`, `decompose`, `fit`, `fit-probit`, `predict` and `plot`.
//!
//! Inputs are CSV files with a header row; columns are picked by name with
//! `--y`, `--coords`, `--x` and `--group`. Fit summaries are JSON with every
//! float rounded to 12 significant digits, figures are SVG 1.1.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O failure.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corr::Family;
use crate::error::{Error, Result};

mod decompose;
mod fit;
mod plot;
mod probit;
mod simulate;
mod table;

#[derive(Debug, Parser)]
#[command(
    name = "autocorr-basis",
    version,
    about = "Basis-function and correlation models of autocorrelation"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset from a Gaussian mixed model or a spatial probit model
    Simulate(SimulateArgs),
    /// Eigen basis `Q Lambda^{1/2}` of a correlation matrix
    Decompose(DecomposeArgs),
    /// Fit a linear (mixed) model by maximum likelihood
    Fit(FitArgs),
    /// Bayesian spatial probit regression by Gibbs sampling
    FitProbit(FitProbitArgs),
    /// Predict at new locations from a saved fit
    Predict(PredictArgs),
    /// Data, fitted curve and coefficient-scaled basis curves as SVG
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Ar1,
    Gaussian,
    Exponential,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Ar1 => Family::Ar1,
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Exponential => Family::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisArg {
    Eigen,
    GaussKernel,
    UniformKernel,
    Poly,
    Group,
    Pp,
}

/// `LO:HI:N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for PhiGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("expected LO:HI:N, got `{s}`");
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi && n >= 2) {
            return Err(format!(
                "phi grid needs finite LO < HI and N >= 2, got `{s}`"
            ));
        }
        Ok(PhiGrid { lo, hi, n })
    }
}

/// Knot specification: a count, a comma-separated list of 1-D locations, or a CSV path.
#[derive(Debug, Clone, PartialEq)]
pub enum KnotsArg {
    Count(usize),
    Values(Vec<f64>),
    File(PathBuf),
}

impl FromStr for KnotsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Ok(m) = s.parse::<usize>() {
            return Ok(KnotsArg::Count(m));
        }
        let values: std::result::Result<Vec<f64>, _> =
            s.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match values {
            Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(KnotsArg::Values(v)),
            _ => Ok(KnotsArg::File(PathBuf::from(s))),
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub input: PathBuf,
    /// Response column
    #[arg(long, default_value = "y")]
    pub y: String,
    /// One (time/depth) or two (spatial) coordinate columns
    #[arg(long, value_delimiter = ',', required = true)]
    pub coords: Vec<String>,
    /// Covariate columns; an intercept is added unless --no-intercept
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModel {
    Lmm,
    Probit,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "lmm")]
    pub model: SimModel,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// 1: coordinates t = 1..n; 2: uniform sites on [0, extent]^2
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub extent: f64,
    #[arg(long, value_enum, default_value = "ar1")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2_eps: f64,
    /// Intercept then one coefficient per covariate. In 1-D the first
    /// covariate is the coordinate itself (a trend); others are N(0, 1).
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,0"
    )]
    pub beta: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub coords: Vec<String>,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: f64,
    /// CSV of the basis matrix
    #[arg(long)]
    pub output: PathBuf,
    /// JSON summary; defaults to the output path with a .json extension
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Grouping column for --basis group
    #[arg(long)]
    pub group: Option<String>,
    /// Correlation family; alone it selects the second-order model
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// First-order basis
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// Hold phi fixed
    #[arg(long, allow_hyphen_values = true, conflicts_with = "phi_grid")]
    pub phi: Option<f64>,
    /// Search phi within [LO, HI] (N is ignored)
    #[arg(long, allow_hyphen_values = true)]
    pub phi_grid: Option<PhiGrid>,
    #[arg(long)]
    pub knots: Option<KnotsArg>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Polynomial degree for --basis poly
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Maximize the restricted likelihood instead
    #[arg(long)]
    pub reml: bool,
    /// Drop the independent-error (nugget) variance
    #[arg(long)]
    pub no_nugget: bool,
    /// JSON summary
    #[arg(long)]
    pub output: PathBuf,
    /// Per-row fitted values; defaults to the output path with a .csv extension
    #[arg(long)]
    pub fitted: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitProbitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Predictive-process knots; full rank when absent
    #[arg(long)]
    pub knots: Option<KnotsArg>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi_grid: Option<PhiGrid>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent chains with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 100.0)]
    pub beta_variance: f64,
    /// Hold sigma2_alpha fixed (0 drops the random effect)
    #[arg(long)]
    pub fixed_sigma2: Option<f64>,
    /// Prediction locations (coordinate and covariate columns)
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Side of the automatic prediction grid when --grid is absent
    #[arg(long, default_value_t = 32)]
    pub grid_size: usize,
    #[arg(long)]
    pub output: PathBuf,
    /// Prediction CSV; defaults to the output path with a .csv extension
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// JSON written by `fit`
    #[arg(long)]
    pub fit: PathBuf,
    /// New locations with the fit's coordinate and covariate columns
    #[arg(long)]
    pub input: PathBuf,
    /// Training data; defaults to the input recorded in the fit
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveSet {
    All,
    Basis,
    None,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// JSON written by `fit`
    #[arg(long)]
    pub fit: PathBuf,
    /// Fitted-values CSV; defaults to the one recorded in the fit
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Component curves to draw
    #[arg(long, value_enum, default_value = "all")]
    pub curves: CurveSet,
}

pub(crate) fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn run(config: RunConfig) -> Result<()> {
    match config.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Decompose(a) => decompose::run(&a),
        Command::Fit(a) => fit::run(&a),
        Command::FitProbit(a) => probit::run(&a),
        Command::Predict(a) => fit::predict(&a),
        Command::Plot(a) => plot::run(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    run_from(std::env::args_os())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
