//! `dnascape`: command-line pipeline from simulator logs to viewer bundles.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use settings::Preset;

/// Trajectory landscapes for elementary-step nucleic acid kinetics.
///
/// Exit status: 0 on success, 1 on input errors (bad flags, unreadable or
/// malformed files, invalid settings), 2 on internal errors.
#[derive(Debug, Parser)]
#[command(name = "dnascape", version, max_term_width = 100)]
pub struct Cli {
    /// Seed for every randomized stage
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Settings file of `key = value` lines; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Named parameter set; config file and flags take precedence
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a simulator log into a state/transition dataset (JSON)
    Parse(ParseArgs),
    /// Summarize trajectory outcomes and state counts (JSON)
    Stats(StatsArgs),
    /// Compute geometric scattering features of every state
    Scatter(ScatterArgs),
    /// Build a k-nearest-neighbour table by passage time or edit distance
    Distances(DistancesArgs),
    /// Embed states with PHATE or direct stress fitting (CSV)
    Embed(EmbedArgs),
    /// Score an embedding: distortion and local preservation at each K
    Eval(EvalArgs),
    /// Filter by cumulative time, run DBSCAN and report kinetic traps
    Cluster(ClusterArgs),
    /// Write or re-validate a viewer bundle (JSON)
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbabilityArg {
    Visits,
    HoldingTime,
}

#[derive(Debug, Args)]
pub struct DatasetInput {
    /// Simulator log or dataset JSON written by `parse`
    #[arg(value_name = "DATASET")]
    pub dataset: PathBuf,
    /// How state probabilities are estimated when reading a log
    #[arg(long, value_enum)]
    pub probability: Option<ProbabilityArg>,
    /// Outcome rule: full-duplex, dissociated:STRAND or dp:STRUCTURE (repeatable)
    #[arg(long = "rule", value_name = "RULE")]
    pub rules: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    /// Keep one structure per interval of this many seconds
    #[arg(long, value_name = "SECONDS")]
    pub dt: Option<f64>,
    /// Output file (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    /// Output file (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureFormat {
    /// Little-endian f64 matrix plus a FILE.json sidecar
    Bin,
    Csv,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    /// Number of dyadic wavelet scales J
    #[arg(long, value_name = "J")]
    pub scales: Option<u32>,
    /// Diffusion power of the low-pass filter
    #[arg(long, value_name = "T")]
    pub lowpass_power: Option<u64>,
    /// Scattering order (1 or 2)
    #[arg(long, value_name = "N")]
    pub order: Option<u8>,
    /// Aggregate nodes by these moments, e.g. 1,2,3,4 (default: keep nodes)
    #[arg(long, value_delimiter = ',', value_name = "Q")]
    pub moments: Vec<u32>,
    #[arg(long, value_enum)]
    pub format: Option<FeatureFormat>,
    /// Output file (required for bin)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// Minimum passage time over the observed transition graph
    Mpt,
    /// Edit distance between base-level graphs
    Ged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    /// Exact below 5000 states, forest above
    Auto,
    Exact,
    /// Random-projection forest with exact re-ranking
    Forest,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// Neighbours per state
    #[arg(short, long, value_name = "N")]
    pub k: Option<usize>,
    /// Edit-distance search strategy
    #[arg(long, value_enum)]
    pub search: Option<SearchArg>,
    /// Trees in the projection forest
    #[arg(long, value_name = "N")]
    pub trees: Option<usize>,
    /// Maximum leaf size in the projection forest
    #[arg(long, value_name = "N")]
    pub leaf_size: Option<usize>,
    /// Use the smaller of both directions for each pair
    #[arg(long)]
    pub symmetrize: bool,
    /// Output neighbour table (binary)
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Phate,
    Stress,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Feature matrix from `scatter` (phate; default: scatter with defaults)
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Landmarks used above this many states (phate)
    #[arg(long, value_name = "N")]
    pub n_landmarks: Option<usize>,
    /// Kernel decay exponent (phate)
    #[arg(long, value_name = "A")]
    pub decay: Option<f64>,
    /// Neighbour rank that sets each bandwidth (phate)
    #[arg(long, value_name = "N")]
    pub knn: Option<usize>,
    /// Diffusion time (phate; default: entropy knee)
    #[arg(long, value_name = "T")]
    pub t: Option<u64>,
    /// Largest diffusion time searched for the knee (phate)
    #[arg(long, value_name = "T")]
    pub t_max: Option<u64>,
    /// SMACOF iteration cap (phate)
    #[arg(long, value_name = "N")]
    pub mds_max_iter: Option<usize>,
    /// Passage-time neighbour table (stress)
    #[arg(long, value_name = "FILE")]
    pub mpt: Option<PathBuf>,
    /// Edit-distance neighbour table (stress)
    #[arg(long, value_name = "FILE")]
    pub ged: Option<PathBuf>,
    /// Starting coordinates CSV (stress; default: seeded random)
    #[arg(long, value_name = "FILE")]
    pub init: Option<PathBuf>,
    /// Weight of the passage-time loss (stress)
    #[arg(long, value_name = "W")]
    pub delta: Option<f64>,
    /// Weight of the edit-distance loss (stress)
    #[arg(long, value_name = "W")]
    pub epsilon: Option<f64>,
    /// Initial line-search step (stress)
    #[arg(long, value_name = "S")]
    pub learning_rate: Option<f64>,
    /// Iteration cap (stress)
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,
    /// Min-max scale both target tables to [0, 1] (stress)
    #[arg(long)]
    pub scale_targets: bool,
    /// Output CSV; a FILE.json report is written beside it
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PerOccurrence,
    Unique,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    /// Embedding CSV
    #[arg(long, value_name = "FILE")]
    pub embedding: PathBuf,
    /// Neighbourhood sizes (default: 10,50,100 where fewer than the states)
    #[arg(long = "K", value_delimiter = ',', value_name = "K")]
    pub ks: Vec<usize>,
    /// How repeated transitions count toward distortion
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Also write the report as CSV
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Output JSON (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: DatasetInput,
    /// Embedding CSV
    #[arg(long, value_name = "FILE")]
    pub embedding: PathBuf,
    /// Drop states with less cumulative time than this many seconds
    #[arg(long, value_name = "SECONDS")]
    pub threshold: Option<f64>,
    /// DBSCAN radius (default: elbow of the k-distance curve)
    #[arg(long, value_name = "R")]
    pub eps: Option<f64>,
    /// DBSCAN density threshold, self included
    #[arg(long, value_name = "N")]
    pub min_samples: Option<usize>,
    /// Also write the trap table as CSV
    #[arg(long, value_name = "FILE")]
    pub traps_csv: Option<PathBuf>,
    /// Output JSON (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Simulator log or dataset JSON written by `parse`
    #[arg(value_name = "DATASET", required_unless_present = "bundle")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub probability: Option<ProbabilityArg>,
    /// Outcome rule: full-duplex, dissociated:STRAND or dp:STRUCTURE (repeatable)
    #[arg(long = "rule", value_name = "RULE")]
    pub rules: Vec<String>,
    /// Two-dimensional embedding CSV
    #[arg(long, value_name = "FILE", required_unless_present = "bundle")]
    pub embedding: Option<PathBuf>,
    /// Cluster report from `cluster`
    #[arg(long, value_name = "FILE")]
    pub clusters: Option<PathBuf>,
    /// Reaction name stored in the bundle metadata
    #[arg(long, value_name = "NAME")]
    pub reaction: Option<String>,
    /// Validate and re-emit an existing bundle instead
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dataset", "embedding", "clusters"])]
    pub bundle: Option<PathBuf>,
    /// Output JSON (default: stdout)
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
        Err(_) => ExitCode::from(2),
    }
}
