use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pooled_wear::io::{GeneratorConfig, NoiseFamily};
use pooled_wear::predictive::DEFAULT_LEVELS;
use pooled_wear::{ModelKind, SamplerConfig};

#[derive(Debug, Parser)]
#[command(name = "pooled-wear", version, about = "Independent vs hierarchical Cauchy regression for tool-wise roughness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one or both models and write draws, summaries and a manifest.
    Fit(FitArgs),
    /// Hide the late-life data of sparse tools, fit both models and compare them on it.
    Experiment(ExperimentArgs),
    /// Write a synthetic fleet and its ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Independent,
    Hierarchical,
    Both,
}

impl ModelChoice {
    pub fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelChoice::Independent => vec![ModelKind::Independent],
            ModelChoice::Hierarchical => vec![ModelKind::Hierarchical],
            ModelChoice::Both => vec![ModelKind::Independent, ModelKind::Hierarchical],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Noise {
    Cauchy,
    Gaussian,
}

#[derive(Debug, Clone, Args)]
pub struct FleetArgs {
    /// Number of tools in a generated fleet.
    #[arg(long, default_value_t = 7)]
    pub tools: usize,
    /// Observations per generated tool.
    #[arg(long, default_value_t = 20)]
    pub per_tool: usize,
    /// Fraction of generated observations shifted up by 10 um.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_rate: f64,
    #[arg(long, value_enum, default_value_t = Noise::Cauchy)]
    pub noise: Noise,
    /// Draw noise scales from the untruncated Half-Cauchy.
    #[arg(long)]
    pub untruncated_gamma: bool,
    /// Generator seed; defaults to --seed.
    #[arg(long)]
    pub fleet_seed: Option<u64>,
}

impl FleetArgs {
    pub fn config(&self, seed: u64) -> GeneratorConfig {
        let defaults = GeneratorConfig::default();
        GeneratorConfig {
            n_tools: self.tools,
            per_tool: self.per_tool,
            noise: match self.noise {
                Noise::Cauchy => NoiseFamily::Cauchy,
                Noise::Gaussian => NoiseFamily::Gaussian,
            },
            outlier_rate: self.outlier_rate,
            gamma_bounds: if self.untruncated_gamma { None } else { defaults.gamma_bounds },
            seed: self.fleet_seed.unwrap_or(seed),
            ..defaults
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset CSV with columns tool_id,sliding_distance,roughness_ra.
    #[arg(long, conflicts_with = "generate")]
    pub input: Option<PathBuf>,
    /// Use a synthetic fleet instead of --input.
    #[arg(long)]
    pub generate: bool,
    #[command(flatten)]
    pub fleet: FleetArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Root seed for the sampler (and the generator, unless --fleet-seed is given).
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    /// Leapfrog steps per transition.
    #[arg(long, default_value_t = 32)]
    pub leapfrog: usize,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            n_warmup: self.warmup,
            n_samples: self.samples,
            target_accept: self.target_accept,
            n_leapfrog: self.leapfrog,
            rng_seed: self.seed,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum, default_value_t = ModelChoice::Hierarchical)]
    pub model: ModelChoice,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Repeat the run recorded in a manifest; data and sampler flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated sparse tool labels; defaults to the last two tools.
    #[arg(long, value_delimiter = ',')]
    pub sparse_tools: Vec<String>,
    /// Training points kept for each sparse tool (smallest sliding distances).
    #[arg(long, default_value_t = 5)]
    pub n_visible: usize,
    /// Comma-separated quantile levels; must include 0.025 and 0.975.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LEVELS.to_vec())]
    pub levels: Vec<f64>,
    /// Repeat the experiment recorded in a manifest; data, sampler and split flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub fleet: FleetArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}
