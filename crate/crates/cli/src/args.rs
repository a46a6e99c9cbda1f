use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Gradient-projection stepsize constant; problem dependent, so tune it.
pub const DEFAULT_STEPSIZE: f64 = 500.0;

#[derive(Debug, Parser)]
#[command(
    name = "hetcache",
    version,
    about = "Probabilistic caching in two-tier wireless networks: analysis, optimization and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the analytic STP of one design.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        design: DesignArgs,
        /// Which analytic expression to evaluate.
        #[arg(long, value_enum, default_value_t = Region::Both)]
        region: Region,
    },
    /// Estimate the STP of one design by Monte Carlo simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Jointly optimize both tiers' caching probabilities.
    OptimizeJoint {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Trace CSV path (default: `<out>.trace.csv` when `--out` is given).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exact joint optimum when both tiers have the same cache size.
    OptimizeEqual {
        #[command(flatten)]
        common: Common,
    },
    /// Nash equilibrium of the two-operator caching game.
    Game {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Trace CSV path (default: `<out>.trace.csv` when `--out` is given).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate several designs over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Parameter to vary.
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Comma-separated designs: joint, ne, equal, most-popular, iid, uniform, or a marginals file.
        #[arg(long, value_delimiter = ',', default_value = "joint,ne,most-popular,iid")]
        designs: Vec<String>,
        #[arg(long, value_enum, default_value_t = Metric::Asymptotic)]
        metric: Metric,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output path (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Exit with status 2 if an optimizer fails to converge or a monotonicity check fails.
    #[arg(long)]
    pub strict: bool,
    /// Override `P₂/N₀` in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Joint optimizer.
    #[arg(long, value_enum, default_value_t = Method::Bsum)]
    pub method: Method,
    /// Stepsize constant `c` of the gradient method, `ε(t) = c / (2 + t^0.55)`.
    #[arg(long, default_value_t = DEFAULT_STEPSIZE)]
    pub stepsize: f64,
    #[arg(long, default_value_t = hetcache::joint::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = hetcache::joint::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

impl Default for SolverArgs {
    fn default() -> Self {
        SolverArgs {
            method: Method::Bsum,
            stepsize: DEFAULT_STEPSIZE,
            tol: hetcache::joint::DEFAULT_TOL,
            max_iter: hetcache::joint::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct DesignArgs {
    /// Design: uniform, joint, ne, equal, most-popular, iid, or a marginals file.
    #[arg(long, default_value = "uniform")]
    pub design: String,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    /// Multiply the default window side.
    #[arg(long, default_value_t = 1.0)]
    pub window_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bsum,
    Gp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Region {
    General,
    Asymptotic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Asymptotic,
    General,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    SnrDb,
    LambdaU,
    K1,
    K2,
    Gamma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SnrDb => "snr_db",
            SweepParam::LambdaU => "lambda_u",
            SweepParam::K1 => "k1",
            SweepParam::K2 => "k2",
            SweepParam::Gamma => "gamma",
        }
    }
}
