use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "steinerwl", version, about = "RSMT wirelength estimation: classical solvers and a learned Steiner point classifier")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Seed for data generation, initialisation and data order.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel sections [default: available cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Key-value file of default flag values (`lr = 1e-3`); flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Primary output file; the run manifest is written beside it.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate and label synthetic nets into a JSONL dataset.
    GenData(GenData),
    /// Label nets from a netlist with the exact or heuristic oracle.
    Label(Label),
    /// Train a model on a labeled dataset.
    Train(Train),
    /// Continue training a checkpoint on another labeled dataset.
    FineTune(FineTune),
    /// Print the estimated wirelength of every net.
    Predict(Predict),
    /// Compare methods against the exact (or heuristic) reference.
    Eval(Eval),
    /// Sweep checkpoints, thresholds and batch sizes for error and runtime.
    Bench(Bench),
    /// Summarise a per-net evaluation CSV.
    Report(Report),
}

pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range {s:?}, expected LO:HI"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range {s:?}, expected LO:HI"))?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok(lo..=hi)
}

fn parse_clusters(s: &str) -> Result<(usize, i64), String> {
    let (k, spread) = s.split_once(':').ok_or_else(|| format!("expected CLUSTERS:SPREAD, got {s:?}"))?;
    let k = k.parse().map_err(|_| format!("bad cluster count {k:?}"))?;
    let spread = spread.parse().map_err(|_| format!("bad spread {spread:?}"))?;
    Ok((k, spread))
}

#[derive(Args, Debug)]
pub struct GenData {
    #[arg(long)]
    pub count: usize,
    /// Inclusive degree range.
    #[arg(long, value_parser = parse_range, default_value = "5:30")]
    pub degrees: RangeInclusive<usize>,
    /// Side of the square integer coordinate domain.
    #[arg(long, default_value_t = 1000)]
    pub extent: i64,
    /// Clustered pins instead of uniform ones.
    #[arg(long, value_name = "CLUSTERS:SPREAD", value_parser = parse_clusters)]
    pub clustered: Option<(usize, i64)>,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Largest degree solved exactly; larger nets use iterated 1-Steiner.
    #[arg(long, default_value_t = 10)]
    pub exact_max_degree: usize,
}

#[derive(Args, Debug)]
pub struct NetInput {
    /// A JSONL net file, or `design.nets,design.pl` for Bookshelf input.
    /// Repeat for several netlists.
    #[arg(long = "nets", required = true, value_name = "FILE[,FILE]")]
    pub nets: Vec<String>,
    /// Nets whose de-duplicated degree is outside this range are skipped.
    #[arg(long, value_parser = parse_range, default_value = "3:64")]
    pub degree_filter: RangeInclusive<usize>,
}

#[derive(Args, Debug)]
pub struct Label {
    #[command(flatten)]
    pub input: NetInput,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Width of the output head's hidden layer.
    #[arg(long, default_value_t = 32)]
    pub mlp_hidden: usize,
    /// Drop the residual layernorm after each block.
    #[arg(long)]
    pub no_layernorm: bool,
    /// Local messages use the neighbor state, relu(h_u + e), instead of relu(h_v + e).
    #[arg(long)]
    pub neighbor_messages: bool,
}

#[derive(Args, Debug)]
pub struct LoopArgs {
    /// Labeled dataset (from gen-data or label).
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out labeled dataset for validation.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    /// Without --val-data, hold out this many nets from the end of --data.
    #[arg(long, default_value_t = 1000)]
    pub val_count: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Nets per parallel forward/backward shard.
    #[arg(long, default_value_t = 4)]
    pub shard_size: usize,
    /// L2 weight decay added to the gradient.
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    /// Loss weight of positive (Steiner) candidates.
    #[arg(long, default_value_t = 1.0)]
    pub pos_weight: f32,
    #[arg(long, default_value_t = 500)]
    pub val_every: usize,
    /// Average the logged loss over this many steps.
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
    /// Probability threshold used by validation.
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f32,
    /// Cosine learning-rate decay to 5% of --lr.
    #[arg(long)]
    pub cosine: bool,
}

#[derive(Args, Debug)]
pub struct Train {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: LoopArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
}

#[derive(Args, Debug)]
pub struct FineTune {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub run: LoopArgs,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    /// Refuse checkpoints whose architecture differs from this one, e.g.
    /// `layers=4,hidden=32,mlp_hidden=32,layernorm=true,neighbor_messages=false`.
    #[arg(long)]
    pub expect_arch: Option<String>,
}

#[derive(Args, Debug)]
pub struct InferenceArgs {
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f32,
    /// Nets per forward pass.
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Degree groups that batches are formed within.
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
}

#[derive(Args, Debug)]
pub struct Predict {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub input: NetInput,
    #[command(flatten)]
    pub inference: InferenceArgs,
}

#[derive(Args, Debug)]
pub struct Eval {
    #[command(flatten)]
    pub input: NetInput,
    /// Comma separated subset of mst, i1s, exact, model.
    #[arg(long, default_value = "mst,exact")]
    pub methods: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug)]
pub struct Bench {
    #[command(flatten)]
    pub input: NetInput,
    /// Comma separated checkpoints to compare.
    #[arg(long, required = true)]
    pub checkpoints: String,
    #[arg(long, default_value = "0.3")]
    pub thresholds: String,
    #[arg(long, default_value = "16")]
    pub batch_sizes: String,
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug)]
pub struct Report {
    /// Per-net CSV written by `eval`.
    #[arg(long)]
    pub input: PathBuf,
}
