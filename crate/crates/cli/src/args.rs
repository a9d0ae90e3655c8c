use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "vecdep",
    version,
    about = "Dependence between random vectors via collapsing functions and Kendall distributions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a reproducible sample from an Archimedean copula or a dependence scenario.
    Simulate(SimulateArgs),
    /// Collapse one group of columns to a scalar series.
    Collapse(CollapseArgs),
    /// Measure the association between two collapsed groups.
    Measure(MeasureArgs),
    /// Emit pairwise pseudo-observation panels for all groups.
    Assess(AssessArgs),
    /// Evaluate or sample Kendall distributions and Kendall copulas.
    Kendall(KendallArgs),
    /// Compute a dependence measure over moving windows.
    Rolling(RollingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimFamily {
    Clayton,
    Gumbel,
    Independence,
    Comonotone,
    Countermonotone,
    IndependentGroups,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarginArg {
    Uniform,
    Normal,
    Exponential,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub family: SimFamily,
    /// Generator parameter (Archimedean families only).
    #[arg(long, conflicts_with = "tau")]
    pub theta: Option<f64>,
    /// Kendall's tau of the bivariate generator; converted to theta.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Group dimensions `p,q`.
    #[arg(long, conflicts_with = "dim")]
    pub dims: Option<String>,
    /// Total dimension of a single-group Archimedean sample.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Marginal distribution applied to the uniform sample.
    #[arg(long, value_enum, default_value = "uniform")]
    pub margin: MarginArg,
    /// Also write a groups configuration for the emitted columns.
    #[arg(long)]
    pub groups_out: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CollapseName {
    WeightedAverage,
    ExtremeAverage,
    Maximum,
    Minimum,
    Distance,
    Kernel,
    MultivariateRank,
    Pit,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Groups configuration JSON.
    #[arg(long)]
    pub groups: PathBuf,
}

#[derive(Debug, Args)]
pub struct CollapseOpts {
    #[arg(long, value_enum, default_value = "weighted-average")]
    pub collapse: CollapseName,
    /// Collapse parameters as a JSON object, e.g. '{"metric":{"name":"minkowski","r":2}}'.
    #[arg(long)]
    pub collapse_params: Option<String>,
    /// Replace every column by its pseudo-observations before collapsing.
    #[arg(long)]
    pub rank_margins: bool,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub group: String,
    #[command(flatten)]
    pub collapse: CollapseOpts,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureName {
    Pearson,
    Spearman,
    Tau,
    TailUpper,
    TailLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiName {
    Asymptotic,
    Bootstrap,
    None,
}

#[derive(Debug, Args)]
pub struct MeasureOpts {
    #[arg(long)]
    pub group_a: String,
    #[arg(long)]
    pub group_b: String,
    #[command(flatten)]
    pub collapse: CollapseOpts,
    #[arg(long, value_enum, default_value = "pearson")]
    pub measure: MeasureName,
    /// Tail level k (tail measures); defaults to ceil(sqrt(k)).
    #[arg(long)]
    pub tail_k: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    pub ci: CiName,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_reps: usize,
    /// Random 4-tuples for the pairwise tau variance (default: all up to 200000).
    #[arg(long)]
    pub tuples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub opts: MeasureOpts,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssessFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub collapse: CollapseOpts,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: AssessFormat,
    /// Side length of one SVG cell in pixels.
    #[arg(long, default_value_t = 200.0)]
    pub cell: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenFamily {
    Clayton,
    Gumbel,
    Independence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KendallMode {
    Univariate,
    Joint,
    Copula,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct KendallArgs {
    #[arg(long, value_enum)]
    pub family: GenFamily,
    #[arg(long, conflicts_with = "tau")]
    pub theta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Group dimensions `p` or `p,q`.
    #[arg(long)]
    pub dims: String,
    #[arg(long, value_enum)]
    pub mode: KendallMode,
    /// Evaluate at a single point `t` or `t1,t2` instead of a grid.
    #[arg(long)]
    pub at: Option<String>,
    /// Grid points per axis on [0, 1].
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    /// Sample size (sample mode).
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed (sample mode).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Highest generator derivative order to support.
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Output format; sample mode always writes CSV.
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutFormat,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RollingArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub opts: MeasureOpts,
    /// Window length W (at least 10).
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
