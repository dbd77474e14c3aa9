use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use faframe::frames::FrameGroup;

#[derive(Debug, Parser)]
#[command(name = "faframe", version, about = "Frame averaging tools for atomic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write canonical views of every structure in an extended-XYZ file.
    Canonicalize(CanonicalizeArgs),
    /// Symmetry metrics of a model under one or more symmetry methods.
    Audit(AuditArgs),
    /// Expressivity benchmarks.
    Bench(BenchArgs),
    /// Finite-difference check of the model gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("which").required(true).args(["all_frames", "sample"])))]
pub struct CanonicalizeArgs {
    pub input: PathBuf,
    /// E3, SE3 or Z_AXIS_2D.
    #[arg(long, default_value = "E3")]
    pub group: FrameGroup,
    /// Emit every frame element.
    #[arg(long)]
    pub all_frames: bool,
    /// Emit one frame element drawn with this seed.
    #[arg(long, value_name = "SEED")]
    pub sample: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also build the radius graph of each view with this cutoff (Å) and
    /// record its edge count.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value_t = 40)]
    pub max_neighbors: usize,
}

/// Model settings shared by commands that build a FAENet. Flags override
/// the config file, which overrides the built-in defaults.
#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// JSON file with FAENet hyperparameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub hidden_channels: Option<usize>,
    #[arg(long)]
    pub num_filters: Option<usize>,
    #[arg(long)]
    pub num_gaussians: Option<usize>,
    #[arg(long)]
    pub num_interactions: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub max_neighbors: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Directory of `.xyz` / `.extxyz` files; every frame is one system.
    pub systems: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter checkpoint; the model is randomly initialised otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    pub fa_mode: Vec<String>,
    /// Rotations (and, separately, reflections) per system.
    #[arg(long, default_value_t = 10)]
    pub transforms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report force metrics.
    #[arg(long)]
    pub forces: bool,
    #[arg(long, short, default_value = "report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(subcommand)]
    pub family: BenchFamily,
}

#[derive(Debug, Subcommand)]
pub enum BenchFamily {
    /// Cis/trans k-chains.
    Kchains {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[command(flatten)]
        common: BenchCommon,
    },
    /// Rotated L-fold rings above an anchor.
    Rotsym {
        #[arg(long = "L", value_delimiter = ',', default_value = "2,3,5,7")]
        orders: Vec<usize>,
        /// Class-B rotation in radians; π/L when absent.
        #[arg(long)]
        angle: Option<f64>,
        #[command(flatten)]
        common: BenchCommon,
    },
}

#[derive(Debug, Args, Clone)]
pub struct BenchCommon {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated interaction-layer counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub layers: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Seed of the first run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value = "stochastic")]
    pub fa_mode: String,
    #[arg(long, short, default_value = "results.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Entries checked per parameter tensor; 0 checks all.
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, short, default_value = "gradcheck.json")]
    pub output: PathBuf,
    /// Scale the backward rule of this op (negative-control fixture).
    #[arg(long, hide = true)]
    pub corrupt_op: Option<String>,
    #[arg(long, hide = true, default_value_t = 0.5)]
    pub corrupt_factor: f64,
}
