//! Command-line flags and their conversion into a [`RunConfig`].

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use graphgrow_core::synthetic::BlockSpec;
use graphgrow_core::{Family, GrowthMethod, InnerRule, ScenarioSpec, StoppingConfig};

use crate::config::{
    BenchConfig, EvaluateConfig, GenerateConfig, GrowConfig, InputKind, RunConfig, StabilityConfig,
};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "graphgrow", version, about = "Sparse Gaussian graphical models by sequential graph growth")]
pub struct Cli {
    /// Run a JSON RunConfig document instead of a subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (overrides the document's `out`).
    #[arg(long, global = true, env = "GRAPHGROW_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for repetitions and subsamples.
    #[arg(long, global = true, env = "GRAPHGROW_JOBS", value_name = "N")]
    pub jobs: Option<usize>,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ground truth and sample data.
    Generate(GenerateArgs),
    /// Grow graphs from data or a covariance matrix.
    Grow(GrowArgs),
    /// Score traces against a ground truth.
    Evaluate(EvaluateArgs),
    /// Activation ranks over random subsamples.
    Stability(StabilityArgs),
    /// Full benchmark sweep.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub d: usize,
    /// Number of true edges (random family).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub eta: f64,
    /// Sample size (bench also accepts --ns).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix file for the external family.
    #[arg(long, value_name = "PATH")]
    pub external: Option<PathBuf>,
    /// Zero-based first index of a principal block of the external matrix.
    #[arg(long, requires = "block_size")]
    pub block_offset: Option<usize>,
    #[arg(long, requires = "block_offset")]
    pub block_size: Option<usize>,
}

impl ScenarioArgs {
    fn spec(&self, ns: &[usize]) -> ScenarioSpec {
        ScenarioSpec {
            family: self.family,
            d: self.d,
            m: self.m,
            eta: self.eta,
            n: self.n.or(ns.first().copied()).unwrap_or(0),
            seed: self.seed,
            external_path: self.external.clone(),
            external_block: self
                .block_offset
                .zip(self.block_size)
                .map(|(offset, size)| BlockSpec { offset, size }),
        }
    }
}

#[derive(Debug, Args)]
pub struct StoppingArgs {
    /// Iteration cap slope: at most ⌈alpha·|E| + beta⌉ inner iterations.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Stop once an improvement falls below tau times the first one.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub hard_cap: Option<usize>,
    /// Coordinate rule inside the corrections.
    #[arg(long, default_value = "gsl")]
    pub inner_rule: InnerRule,
}

impl StoppingArgs {
    fn stopping(&self) -> StoppingConfig {
        let base = StoppingConfig::default();
        StoppingConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            tau: self.tau.unwrap_or(base.tau),
            hard_cap: self.hard_cap.unwrap_or(base.hard_cap),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of data sets to draw.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct GrowArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "data")]
    pub input_kind: InputKindArg,
    /// Comma-separated growth methods.
    #[arg(long, alias = "methods", value_delimiter = ',', required = true)]
    pub method: Vec<GrowthMethod>,
    #[arg(long)]
    pub kmax: usize,
    /// Tie-break seed for prec/pcorr.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stopping: StoppingArgs,
    /// Also correct naive growths to report their losses.
    #[arg(long)]
    pub naive_losses: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum InputKindArg {
    Data,
    Matrix,
}

impl From<InputKindArg> for InputKind {
    fn from(k: InputKindArg) -> Self {
        match k {
            InputKindArg::Data => InputKind::Data,
            InputKindArg::Matrix => InputKind::Matrix,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `edges.csv` or a precision matrix.
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Trace `.jsonl` files.
    #[arg(required = true, value_name = "TRACE")]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Prefix length for detection frequencies.
    #[arg(long)]
    pub detection_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub nsub: usize,
    /// Defaults to ⌊n/2⌋.
    #[arg(long)]
    pub subsize: Option<usize>,
    #[arg(long)]
    pub method: GrowthMethod,
    #[arg(long)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stopping: StoppingArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated sample sizes; replaces --n.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, alias = "method", value_delimiter = ',', required = true)]
    pub methods: Vec<GrowthMethod>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub bfci_reps: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[command(flatten)]
    pub stopping: StoppingArgs,
    #[arg(long)]
    pub naive_losses: bool,
    /// Re-use repetitions already completed in the output directory.
    #[arg(long)]
    pub resume: bool,
}

impl Command {
    pub fn into_config(self) -> RunConfig {
        match self {
            Command::Generate(a) => RunConfig::Generate(GenerateConfig {
                scenario: a.scenario.spec(&[]),
                repetitions: a.reps,
                out: None,
            }),
            Command::Grow(a) => RunConfig::Grow(GrowConfig {
                input: a.input,
                input_kind: a.input_kind.into(),
                methods: a.method,
                k_max: a.kmax,
                seed: a.seed,
                stopping: a.stopping.stopping(),
                inner_rule: a.stopping.inner_rule,
                naive_losses: a.naive_losses,
                out: None,
            }),
            Command::Evaluate(a) => RunConfig::Evaluate(EvaluateConfig {
                truth: a.truth,
                traces: a.traces,
                scenario: a.scenario,
                detection_k: a.detection_k,
                out: None,
            }),
            Command::Stability(a) => RunConfig::Stability(StabilityConfig {
                input: a.input,
                n_sub: a.nsub,
                sub_size: a.subsize,
                method: a.method,
                k_max: a.kmax,
                seed: a.seed,
                stopping: a.stopping.stopping(),
                inner_rule: a.stopping.inner_rule,
                out: None,
            }),
            Command::Bench(a) => RunConfig::Bench(BenchConfig {
                scenarios: vec![a.scenario.spec(&a.ns)],
                ns: a.ns,
                methods: a.methods,
                repetitions: a.reps,
                bfci_repetitions: a.bfci_reps,
                k_max: a.kmax,
                stopping: a.stopping.stopping(),
                inner_rule: a.stopping.inner_rule,
                naive_losses: a.naive_losses,
                resume: a.resume,
                out: None,
            }),
        }
    }
}

impl Cli {
    /// The configuration to run: a document or a subcommand, with `--out` applied.
    pub fn resolve(self) -> CliResult<RunConfig> {
        let mut cfg = match (self.config, self.command) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("give either --config or a subcommand, not both"))
            }
            (None, None) => return Err(CliError::config("a subcommand or --config is required")),
            (Some(path), None) => RunConfig::from_path(&path)?,
            (None, Some(cmd)) => cmd.into_config(),
        };
        if let Some(out) = self.out {
            *cfg.out_mut() = Some(out);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
