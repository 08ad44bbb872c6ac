use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hkdyn_core::diagnostics::DEFAULT_THRESHOLD;
use hkdyn_core::experiments::{linear_grid, uniform_line, DemoKind};
use hkdyn_core::graphs::GraphSpec;
use hkdyn_core::{Configuration, HkError, Model};

#[derive(Debug, Parser)]
#[command(
    name = "hkdyn",
    version,
    about = "Bounded-confidence opinion dynamics on social networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and optionally write it with per-step diagnostics.
    Simulate(SimulateArgs),
    /// Convergence time over a grid of random networks.
    Sweep(SweepArgs),
    /// Randomized checks of the theorem-backed invariants; exits 2 on violations.
    Check(CheckArgs),
    /// Small self-verifying instances of qualitative behaviors.
    Demo(DemoArgs),
    /// Energy, active energy, second eigenvalue and gap bound of a configuration or run.
    SpectralReport(SpectralArgs),
}

/// `file:<path>` or `uniform:<n>,<lo>,<hi>,<seed>`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitArg {
    File(PathBuf),
    Uniform {
        n: usize,
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl InitArg {
    pub fn load(&self) -> Result<Configuration, HkError> {
        match self {
            InitArg::File(p) => hkdyn_core::io::load_configuration(p),
            InitArg::Uniform { n, lo, hi, seed } => uniform_line(*n, *lo, *hi, *seed),
        }
    }
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("cannot parse {what} from '{s}'"))
}

impl FromStr for InitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("file", path)) => Ok(InitArg::File(path.into())),
            Some(("uniform", rest)) => {
                let parts: Vec<&str> = rest.split(',').collect();
                let [n, lo, hi, seed] = parts[..] else {
                    return Err(format!("expected uniform:<n>,<lo>,<hi>,<seed>, got '{s}'"));
                };
                Ok(InitArg::Uniform {
                    n: num(n, "n")?,
                    lo: num(lo, "lo")?,
                    hi: num(hi, "hi")?,
                    seed: num(seed, "seed")?,
                })
            }
            _ => Err(format!(
                "expected file:<path> or uniform:<n>,<lo>,<hi>,<seed>, got '{s}'"
            )),
        }
    }
}

/// `zero`, `uniform:<seed>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseArg {
    Zero,
    Uniform(u64),
    File(PathBuf),
}

impl FromStr for NoiseArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "zero" => Ok(NoiseArg::Zero),
            Some(("uniform", seed)) => Ok(NoiseArg::Uniform(num(seed, "seed")?)),
            Some(("file", path)) => Ok(NoiseArg::File(path.into())),
            _ => Err(format!(
                "expected zero, uniform:<seed> or file:<path>, got '{s}'"
            )),
        }
    }
}

/// A noise bound, or `auto` for `1/(8 n^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsArg {
    Auto,
    Value(f64),
}

impl EpsArg {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            EpsArg::Auto => 1.0 / (8.0 * (n * n) as f64),
            EpsArg::Value(v) => v,
        }
    }
}

impl FromStr for EpsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(EpsArg::Auto);
        }
        let v: f64 = num(s, "eps")?;
        if v.is_finite() && v >= 0.0 {
            Ok(EpsArg::Value(v))
        } else {
            Err(format!("eps must be finite and non-negative, got {v}"))
        }
    }
}

/// `start:stop:step` or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            [a, b, c] => linear_grid(
                num(a, "grid start")?,
                num(b, "grid stop")?,
                num(c, "grid step")?,
            )
            .map(Grid)
            .map_err(|e| e.to_string()),
            [list] => list
                .split(',')
                .map(|v| num(v, "grid value"))
                .collect::<Result<_, _>>()
                .map(Grid),
            _ => Err(format!(
                "expected start:stop:step or a comma list, got '{s}'"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Classical,
    Social,
    Nd,
    NdPairwise,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Classical => Model::Classical,
            ModelArg::Social => Model::Social,
            ModelArg::Nd => Model::Nd,
            ModelArg::NdPairwise => Model::NdPairwise,
        }
    }
}

/// Network flags shared by `simulate` and `spectral-report`.
#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Static social network: gnp:<n>,<p> | ba:<n>,<m> | complete:<n> | path:<n> | empty:<n> | file:<path>.
    #[arg(long, conflicts_with = "schedule")]
    pub graph: Option<GraphSpec>,
    /// Time-varying network file: {"friendly": bool, "graphs": [{"n", "edges"}, ...]}.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Seed for random graph generation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Classical)]
    pub model: ModelArg,
    /// Initial configuration: file:<path> | uniform:<n>,<lo>,<hi>,<seed>.
    #[arg(long)]
    pub init: InitArg,
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Noise for nd models: zero | uniform:<seed> | file:<path>.
    #[arg(long)]
    pub noise: Option<NoiseArg>,
    /// Noise bound, or `auto` for 1/(8n^2).
    #[arg(long)]
    pub eps: Option<EpsArg>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Stop once the total movement of a step falls below this.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Stop once every separated group fits in an interval of this length.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Compute energy and spectral diagnostics for every step.
    #[arg(long)]
    pub spectral: bool,
    /// Trajectory output (JSON lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-step report output (CSV).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Record unfriendly schedule transitions instead of aborting.
    #[arg(long)]
    pub allow_unfriendly: bool,
    /// Allow spectral diagnostics above the population limit.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphModelArg {
    Gnp,
    Ba,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep specification (JSON); the grid flags below are ignored when given.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub n: Vec<usize>,
    /// Edge probabilities: start:stop:step or a comma list.
    #[arg(long, default_value = "0.02:1.0:0.02")]
    pub p_grid: Grid,
    /// Attachment counts for --graph-model ba, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub m_list: Vec<usize>,
    #[arg(long, value_enum, default_value_t = GraphModelArg::Gnp)]
    pub graph_model: GraphModelArg,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Step cap per run.
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    /// Per-run results (CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-(n, p) aggregate (CSV).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run even when the work estimate exceeds the budget.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Noisy-dynamics lemmas on random trajectories.
    NdLemmas,
    /// Energy monotonicity and the spectral decrement bound on social runs.
    Energy,
    /// Second eigenvalue against the diameter bound on random communication graphs.
    Gap,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Number of agents per trial.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Noise bound for nd-lemmas, or `auto` for 1/(8n^2).
    #[arg(long, default_value = "auto")]
    pub eps: EpsArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Steps per trial.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Rule for nd-lemmas.
    #[arg(long, value_enum, default_value_t = ModelArg::Nd)]
    pub model: ModelArg,
    /// Violation records (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// nofrz | initdep | noorder | nondet
    pub kind: DemoKind,
    /// Noise bound for nondet.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Gap values for initdep (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Steps shown for nofrz.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Trajectory of the representative run (JSON lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long)]
    pub init: InitArg,
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Follow the dynamics for this many steps and report each one (CSV).
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}
