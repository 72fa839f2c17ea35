use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use clamr::influence::{DEFAULT_EPSILON, DEFAULT_MC_SAMPLES, DEFAULT_THRESHOLD};
use clamr::synth::{Method, ScenarioKind};
use clamr::{InitStrategy, Loss, McmcSettings, SamplerKind, VarianceMode};

#[derive(Debug, Parser)]
#[command(name = "clamr", version, about = "Mixture clustering with priors built from meaningful regions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every feature and rank features by their Bayes factor.
    Pretrain(PretrainArgs),
    /// Fit the model and write draws, the point estimate and the PSM.
    Fit(FitArgs),
    /// Summarize a fit: region profiles, WAIC, diagnostics, predictive draws.
    Summarize(SummarizeArgs),
    /// Generate one synthetic dataset.
    Simulate(SimulateArgs),
    /// Run a replicated simulation study and tabulate ARI and cluster counts.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Starting allocation of each chain.
    #[arg(long, default_value = "kmeans", value_parser = parse_from_str::<InitStrategy>)]
    pub init: InitStrategy,
}

impl McmcArgs {
    pub fn settings(&self) -> McmcSettings {
        McmcSettings {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            chains: self.chains,
            seed: self.seed,
            init: self.init,
        }
    }
}

/// Model flags; each overrides the region spec document when given.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of mixture components.
    #[arg(long = "L")]
    pub components: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<VarianceMode>)]
    pub variance_mode: Option<VarianceMode>,
    /// Interval-null radius, used for rho calibration and Bayes factors.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Monte Carlo draws for rho calibration.
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV with a header of feature names; empty cells are missing.
    #[arg(long)]
    pub data: PathBuf,
    /// Region spec JSON. Optional for the bgmm sampler.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Comma-separated feature columns to use (default: every column).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Column holding known cluster labels, excluded from the features and
    /// scored against the point estimate.
    #[arg(long)]
    pub truth: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing run in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Features with a Bayes factor at or above this value are selected.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "clamr", value_parser = parse_from_str::<SamplerKind>)]
    pub sampler: SamplerKind,
    #[arg(long, default_value = "vi", value_parser = parse_from_str::<Loss>)]
    pub loss: Loss,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// The CSV the run was fitted to.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "vi", value_parser = parse_from_str::<Loss>)]
    pub loss: Loss,
    /// Equally spaced retained draws used for posterior predictive samples.
    #[arg(long, default_value_t = 500)]
    pub predictive_samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_from_str::<ScenarioKind>)]
    pub scenario: ScenarioKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(long, value_parser = parse_from_str::<ScenarioKind>)]
    pub scenario: ScenarioKind,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "clamr,bgmm,kmeans,hca", value_parser = parse_from_str::<Method>)]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Replication `r` simulates with seed `seed + r`.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "kmeans", value_parser = parse_from_str::<InitStrategy>)]
    pub init: InitStrategy,
    #[arg(long, default_value_t = 0.95)]
    pub omega: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long = "L", default_value_t = 10)]
    pub components: usize,
    #[arg(long, default_value = "simulation", value_parser = parse_from_str::<VarianceMode>)]
    pub variance_mode: VarianceMode,
    #[arg(long, default_value = "vi", value_parser = parse_from_str::<Loss>)]
    pub loss: Loss,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    /// Use this rho for every feature instead of calibrating it.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}
