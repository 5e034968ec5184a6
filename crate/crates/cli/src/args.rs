use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Finite mixture models from the command line. Every command is
/// deterministic given --seed (default: $FINMIX_SEED, else 0). Outputs go
/// to --out, with a run manifest at <out>.manifest.json, or to stdout.
#[derive(Debug, Parser)]
#[command(name = "finmix", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a labelled sample from a mixture or HMM spec: CSV of y (or y1,y2) and z.
    Simulate(SimulateArgs),
    /// Tabulate a mixture density (or Poisson pmf) over a grid.
    Density(DensityArgs),
    /// Fit a mixture by EM, hard-classification EM or Gibbs sampling.
    Fit(FitArgs),
    /// Posterior over the number of components from Monte-Carlo evidence.
    SelectG(SelectGArgs),
    /// Tabulate a beta-binomial, negative-binomial or Dirichlet-multinomial pmf.
    Compound(CompoundArgs),
    /// Count and locate the modes of a univariate Normal mixture.
    Modes(ModesArgs),
    /// Histogram of block counts over repeated Chinese-restaurant draws.
    Crp(CrpArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Random seed.
    #[arg(long, env = "FINMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted (and no manifest is written).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `lo:hi:points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        // Points are placed about the midpoint so that a grid symmetric about
        // zero is exactly symmetric in floating point.
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| match k {
                0 => self.lo,
                k if k + 1 == self.points => self.hi,
                k => mid + half * ((2 * k) as f64 - last) / last,
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, points] = parts[..] else {
            return Err(format!("expected lo:hi:points, got `{s}`"));
        };
        let lo: f64 = lo.parse().map_err(|_| format!("bad grid lower bound `{lo}`"))?;
        let hi: f64 = hi.parse().map_err(|_| format!("bad grid upper bound `{hi}`"))?;
        let points: usize = points.parse().map_err(|_| format!("bad grid point count `{points}`"))?;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(format!("grid needs finite lo < hi, got {lo}:{hi}"));
        }
        if points < 2 {
            return Err("grid needs at least 2 points".into());
        }
        Ok(Grid { lo, hi, points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Normal,
    BivariateNormal,
    Poisson,
}

impl From<FamilyArg> for finmix::Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Normal => finmix::Family::Normal,
            FamilyArg::BivariateNormal => finmix::Family::BivariateNormal,
            FamilyArg::Poisson => finmix::Family::Poisson,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Mixture or HMM spec document.
    #[arg(long)]
    pub spec: PathBuf,
    /// Sample size (sequence length for an HMM).
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    /// Mixture spec document.
    #[arg(long)]
    pub spec: PathBuf,
    /// Evaluation grid; defaults to a range covering the mass. For Poisson
    /// specs the table runs over the integers in [max(lo,0), hi].
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Em,
    HardEm,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Kpoint,
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Data CSV with a `y` column, or `y1,y2` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of components.
    #[arg(long = "G", alias = "g")]
    pub g: usize,
    /// Component family; defaults to the data's column layout (Normal for `y`).
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// EM: iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// EM: relative log-likelihood tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// EM: additional seeded initialisations.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// EM: initialisation.
    #[arg(long, value_enum, default_value_t = InitArg::Kpoint)]
    pub init: InitArg,
    /// EM: variance floor (default 1e-6 times the sample variance).
    #[arg(long)]
    pub variance_floor: Option<f64>,
    /// Gibbs: sweeps discarded before sampling.
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Gibbs: retained draws.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Gibbs: sweeps per retained draw.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Gibbs: prior spec document (default: scaled to the data).
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Gibbs: grid for the posterior predictive density (default: data range padded by 10%, 200 points).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Gibbs: predictive-density CSV (default: <out>.predictive.csv).
    #[arg(long)]
    pub predictive: Option<PathBuf>,
    /// Gibbs: write the raw chain as JSON lines.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectGArgs {
    /// Data CSV with a `y` column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub g_min: usize,
    #[arg(long, default_value_t = 4)]
    pub g_max: usize,
    /// Prior draws per evidence estimate.
    #[arg(long, default_value_t = 10_000)]
    pub prior_draws: usize,
    /// Symmetric Dirichlet concentration on the weights.
    #[arg(long, default_value_t = 1.0)]
    pub dirichlet: f64,
    /// Prior mean of component means (default: data midrange).
    #[arg(long, allow_hyphen_values = true)]
    pub mean_loc: Option<f64>,
    /// Prior sd of component means (default: data range).
    #[arg(long)]
    pub mean_scale: Option<f64>,
    /// Inverse-gamma shape on variances.
    #[arg(long, default_value_t = 2.0)]
    pub ig_shape: f64,
    /// Inverse-gamma scale on variances (default: sample variance).
    #[arg(long)]
    pub ig_scale: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompoundFamily {
    BetaBinomial,
    NegativeBinomial,
    DirichletMultinomial,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompoundArgs {
    /// Compound spec document; alternative to --family and parameters.
    #[arg(long, conflicts_with = "family")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<CompoundFamily>,
    /// Binomial / multinomial trials.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Dirichlet concentrations, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub concentration: Option<Vec<f64>>,
    /// Negative binomial: largest y tabulated (default: mean + 20 sd, extended to cover the tail).
    #[arg(long)]
    pub max_y: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModesArgs {
    /// Univariate Normal mixture spec document.
    #[arg(long)]
    pub spec: PathBuf,
    /// Search interval and grid (default: 12 sd beyond the extreme atoms, 10000 points).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrpArgs {
    #[arg(long)]
    pub alpha: f64,
    /// Number of customers.
    #[arg(long)]
    pub n: usize,
    /// Independent draws.
    #[arg(long, default_value_t = 10_000)]
    pub runs: usize,
    #[command(flatten)]
    pub common: Common,
}
