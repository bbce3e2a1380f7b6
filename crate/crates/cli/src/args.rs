use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steerlab::Flavor;

const EXAMPLES: &str = "\
Examples:
  steerlab make alpha --alpha2 0.8 --out alpha.json
  steerlab validate alpha.json
  steerlab filter alpha.json --alpha2 0.8 --out filtered.json
  steerlab distill --alpha2 0.8 --copies 2 --mode exact
  steerlab distill --alpha2 0.8 --copies 3 --mode sampled --trials 100000 --seed 7
  steerlab metrics --singlet-fraction alpha.json
  steerlab metrics alpha.json filtered.json
  steerlab robustness alpha.json --flavor generalized
  steerlab fig3 --shots 10000 --seeds 10 --out fig3.csv --svg fig3.svg

Exit codes: 0 success, 2 invalid configuration or input, 3 solver failure.";

#[derive(Debug, Parser)]
#[command(name = "steerlab", version, about = "Steering assemblages: construction, filtering, distillation and metrics")]
#[command(after_help = EXAMPLES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an assemblage and write it as JSON.
    #[command(after_help = "Examples:\n  steerlab make singlet\n  steerlab make alpha --alpha2 0.8 --out alpha.json\n  steerlab make from-state --state rho.json")]
    Make(MakeArgs),
    /// Check an assemblage file for positivity, normalization and no-signalling.
    #[command(after_help = "Example:\n  steerlab validate alpha.json")]
    Validate {
        input: PathBuf,
    },
    /// Apply the amplitude-balancing filter to one outcome branch.
    #[command(after_help = "Example:\n  steerlab filter alpha.json --alpha2 0.8 --outcome 0 --out filtered.json")]
    Filter(FilterArgs),
    /// Run the N-copy distillation protocol and report its branches.
    #[command(after_help = "Examples:\n  steerlab distill --alpha2 0.8 --copies 2\n  steerlab distill --input alpha.json --copies 4 --mode sampled --trials 50000 --seed 1")]
    Distill(DistillArgs),
    /// Assemblage fidelity of two files, or the singlet fraction of one.
    #[command(after_help = "Examples:\n  steerlab metrics a.json b.json\n  steerlab metrics --singlet-fraction a.json")]
    Metrics(MetricsArgs),
    /// Steering robustness via semidefinite programming.
    #[command(after_help = "Example:\n  steerlab robustness alpha.json --flavor lhs --out robustness.json")]
    Robustness(RobustnessArgs),
    /// Imbalance sweep of the original, post-selected and averaged assemblages.
    #[command(after_help = "Example:\n  steerlab fig3 --grid 0.6,0.8,0.9 --shots 10000 --seeds 5 --out sweep.csv --svg sweep.svg")]
    Fig3(Fig3Args),
}

#[derive(Debug, Args)]
pub struct MakeArgs {
    #[arg(value_enum)]
    pub kind: MakeKind,
    /// Squared amplitude α² in (1/2, 1), for `alpha`.
    #[arg(long, required_if_eq("kind", "alpha"))]
    pub alpha2: Option<f64>,
    /// JSON file with a bipartite density matrix, for `from-state`.
    #[arg(long, required_if_eq("kind", "from-state"))]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MakeKind {
    Singlet,
    Alpha,
    FromState,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    pub input: PathBuf,
    /// α² defining the filter `K0 = diag(β/α, 1)`.
    #[arg(long)]
    pub alpha2: f64,
    /// Filter outcome to post-select on (0 success, 1 failure).
    #[arg(long, default_value_t = 0)]
    pub outcome: usize,
    /// Filtered assemblage; the branch probability goes to stdout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["alpha2", "input"]))]
pub struct DistillArgs {
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// An α-assemblage file; α² is read from its reduced state.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, short = 'n')]
    pub copies: usize,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, env = "STEERLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Report path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the averaged output assemblage.
    #[arg(long)]
    pub assemblage_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(num_args = 0..=2)]
    pub files: Vec<PathBuf>,
    #[arg(long, conflicts_with = "files")]
    pub singlet_fraction: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    pub input: PathBuf,
    /// `lhs` (LHS-restricted noise) or `generalized` (any valid noise).
    #[arg(long, default_value = "lhs")]
    pub flavor: Flavor,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Fig3Args {
    /// Comma-separated α² values (default 0.55..0.95 step 0.05 plus 0.905).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Seed replicas per point, used for the error bars.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, env = "STEERLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Table path; `.json` selects JSON, anything else CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}
