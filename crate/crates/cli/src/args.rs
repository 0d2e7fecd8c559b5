use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "attrgraph",
    version,
    about = "Node and attribute embeddings for attributed networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes snapshot, embeddings, metric logs and a manifest.
    Train(TrainArgs),
    /// Evaluate a snapshot on link prediction or node classification.
    Eval(EvalArgs),
    /// Train all four variants on one shared split and compare them.
    Ablate(TrainArgs),
    /// Mask a growing share of training edges and track test metrics.
    PerturbSweep(PerturbArgs),
    /// Vary the number of features kept per node.
    TopnSweep(TopnArgs),
    /// Compare every backward pass against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Write the transition operator as `row,col,value` lines.
    DumpOperator(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Edge list: one `u v` pair per line, optional `# n=.. m=..` header.
    #[arg(long)]
    pub edges: PathBuf,
    /// Feature file, `sparse` (node attr value) or `dense` (CSV rows).
    #[arg(long)]
    pub features: PathBuf,
    /// Optional `node label` lines.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mixing weight between structure and attributes.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Propagation depth K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding width d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Features kept per node, or `none`.
    #[arg(long)]
    pub topn: Option<String>,
    /// full, gcn, inner or ncoll.
    #[arg(long)]
    pub variant: Option<String>,
    /// lp (link prediction) or nc (node classification).
    #[arg(long)]
    pub task: Option<String>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory for all outputs; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Do not print per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub snapshot: PathBuf,
    /// lp or nc; defaults to the task the snapshot was trained for.
    #[arg(long)]
    pub task: Option<String>,
    /// Expected d; must match the snapshot.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Expected K; must match the snapshot.
    #[arg(long)]
    pub k: Option<usize>,
    /// Expected alpha; must match the snapshot.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Cross-validation folds for node classification.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated masking ratios in [0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TopnArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated values of N.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50,100")]
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fix the embedding width (default: random in 1..=6).
    #[arg(long = "d")]
    pub dim: Option<usize>,
    /// Fix the depth (default: random in 0..=2).
    #[arg(long = "K")]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 12)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub max_attributes: usize,
    /// Negate one scorer gradient block to confirm the check catches it.
    #[arg(long)]
    pub inject_sign_flip: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
