//! Command-line arguments. The parsed arguments double as the run
//! configuration stored in every report.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "clusterperm", version, about = "Permutation tests for regressions with multi-way clustered errors")]
pub struct RunConfig {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Root seed for every random component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of non-identity permutations K; chosen from the data extents when omitted.
    #[arg(long, global = true)]
    pub num_perms: Option<usize>,
    /// Significance level.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Relative rank tolerance for the nuisance projection (default: max(N, 2p)·eps).
    #[arg(long, global = true)]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Test β = b0 on a fully observed dyadic array.
    Test(TestArgs),
    /// Confidence interval for a single treatment coefficient.
    Ci(CiArgs),
    /// Blockwise test on an array with missing cells.
    TestMissing(MissingArgs),
    /// Balanced three-way array, permuted along all three indices.
    TestThreeway(DataArgs),
    /// Balanced panel; periods move together.
    TestPanel(DataArgs),
    /// Replicated layout, permuted within cells.
    TestLayout(DataArgs),
    /// Irregular cell sizes, thresholded at L0.
    TestIrregular(IrregularArgs),
    /// Monte Carlo size and power studies.
    Simulate(SimulateArgs),
    /// Maximum fully observed block and block decomposition of a mask.
    Biclique(BicliqueArgs),
}

/// Column bindings for long-format CSV input.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV file with one row per observation and a header line.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub y: String,
    /// Treatment columns (default: every column whose name starts with `d`).
    #[arg(long, value_delimiter = ',')]
    pub treatment: Option<Vec<String>>,
    /// Nuisance covariate columns (default: every column whose name starts with `x`).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, default_value = "i")]
    pub row_col: String,
    #[arg(long, default_value = "j")]
    pub col_col: String,
    /// Third index (replicate, period or slot).
    #[arg(long, default_value = "l")]
    pub third_col: String,
    /// Do not prepend an intercept to the covariates.
    #[arg(long)]
    pub no_intercept: bool,
    /// Row extent (default: largest row index in the file).
    #[arg(long)]
    pub n_rows: Option<usize>,
    /// Column extent (default: largest column index in the file).
    #[arg(long)]
    pub n_cols: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hypothesised treatment coefficients (default: all zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    /// Initial grid half-width in robust standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 6)]
    pub max_expansions: usize,
    #[arg(long, default_value_t = 30)]
    pub refine_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverKind::Greedy)]
    pub biclique_solver: SolverKind,
    /// Greedy restarts.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Smallest block side kept by the decomposition.
    #[arg(long, default_value_t = 2)]
    pub min_block: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MissingArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Explicit mask as a CSV of `i,j,m` triples (default: observed cells of the data).
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IrregularArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Cell-size threshold (default: grid search maximizing retained observations).
    #[arg(long)]
    pub l0: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    /// Size under the null, normal and lognormal treatments.
    Table1,
    /// Size on irregular designs with semi-synthetic errors.
    Table3,
    /// Power along a grid of coefficients.
    Table4,
    /// Largest balanced block of MCAR masks.
    Growth,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub panel: Panel,
    /// Array sizes.
    #[arg(long, value_delimiter = ',', default_value = "25")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Column correlations of the errors (default: 0.15,0.9 for table1 and 0.1 for table4).
    #[arg(long, value_delimiter = ',')]
    pub phi2: Option<Vec<f64>>,
    /// Coefficients for table4 (default: 0.01 to 0.15 in steps of 0.01).
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Observation probabilities for the growth panel.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7,0.9")]
    pub rho: Vec<f64>,
    /// Median repetitions per irregular-design replicate.
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BicliqueArgs {
    /// CSV with columns `i,j` and optionally `m`; rows with `m = 0` are unobserved.
    #[arg(long)]
    pub mask: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub n_rows: Option<usize>,
    #[arg(long)]
    pub n_cols: Option<usize>,
}
