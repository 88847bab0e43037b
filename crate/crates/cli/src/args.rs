use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "overlap-lab", version = env!("OVERLAP_LAB_VERSION"))]
#[command(about = "Synthetic overlap experiments: data generation, training runs, sweeps, stress tests and statistics")]
pub struct Cli {
    /// Leave timestamps out of manifests so identical runs write identical bytes.
    #[arg(long, global = true)]
    pub canonical: bool,

    /// Worker threads for independent training jobs.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired dataset.
    Gen(GenArgs),
    /// Train the three conditions and decide whether to continue.
    Poc(PocArgs),
    /// Train the uoo condition over a grid of topological weights.
    Sweep(SweepArgs),
    /// Train one uoo model and run the stress protocols on it.
    Stress(StressArgs),
    /// Statistics on CSV input.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Persistent homology on CSV input.
    #[command(subcommand)]
    Topo(TopoCommand),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "xor64")]
    pub family: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Falls back to OVERLAP_LAB_SEED, then 0.
    #[arg(long, env = "OVERLAP_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Weight of the label direction leaked into each modality, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub entanglement: f64,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// Also estimate the best single-modality accuracy.
    #[arg(long)]
    pub ceiling: bool,
    /// Print the dataset header and exit.
    #[arg(long)]
    pub dry_run: bool,
}

/// Options shared by the training commands.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config as JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the small smoke configuration (n=256, 2 epochs).
    #[arg(long, conflicts_with = "config")]
    pub smoke: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub entanglement: Option<f64>,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Print the resolved config and exit without training.
    #[arg(long)]
    pub dry_run: bool,
    /// Write SVG plots next to the reports.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct PocArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated seeds. Without it OVERLAP_LAB_SEED gives a single
    /// seed, and otherwise the config's seeds are used.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.01,0.1,1")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    All,
    AlphaDecay,
    Ood,
    OverEntangle,
}

#[derive(Debug, Args)]
pub struct StressArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, env = "OVERLAP_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: ModeArg,
    /// Epochs of α decay and of over-entangled retraining.
    #[arg(long)]
    pub stress_epochs: Option<usize>,
    /// Comma-separated distribution shifts for the ood mode.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Hartigan dip test with a Monte Carlo p-value.
    Dip {
        file: PathBuf,
        #[arg(long, env = "OVERLAP_LAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = overlap_stats::DIP_DRAWS)]
        draws: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One- versus two-component Gaussian mixture by BIC.
    Gmm {
        file: PathBuf,
        #[arg(long, env = "OVERLAP_LAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean-shift changepoints.
    Pelt {
        file: PathBuf,
        /// Defaults to a BIC-style penalty from the difference variance.
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equivalence of two samples within ±delta on the Cohen's d scale.
    Tost {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error type ratio from the three wrong-answer proportions.
    Etr {
        #[arg(long)]
        p_b: f64,
        #[arg(long)]
        p_c: f64,
        #[arg(long)]
        p_d: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FiltrationArg {
    Rips,
    Witness,
    Dtm,
}

#[derive(Debug, Subcommand)]
pub enum TopoCommand {
    /// Persistence diagram of a point cloud (one point per CSV row).
    Persistence {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_dim: usize,
        #[arg(long)]
        max_scale: Option<f64>,
        #[arg(long, value_enum, default_value = "rips")]
        filtration: FiltrationArg,
        /// Landmarks for the witness filtration, neighbours for DTM.
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write diagram.svg into the output directory.
        #[arg(long, requires = "out")]
        plot: bool,
    },
    /// Bottleneck distance between two diagram CSVs (dim,birth,death).
    Bottleneck {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory similarity of two point-cloud CSVs.
    Tsas {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
