use std::path::PathBuf;

use asag_core::corpus::SebSplit;
use asag_core::features::FeatureSet;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "asag", version, about = "Automatic short-answer grading")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Split seed for `split`, base seed for `train`/`serve`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Service data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Embedding provider: hash:<dim>, file:<path> or http://host:port.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw corpus into the pair CSV.
    #[command(subcommand)]
    Ingest(Ingest),
    /// Split a labelled CSV into train/validation(/test) files.
    Split(SplitArgs),
    /// Compute a feature matrix.
    Featurize(FeaturizeArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score a CSV with a checkpoint.
    Score(ScoreArgs),
    /// Compare predicted and gold scores.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum Ingest {
    /// Mohler-style directory with raw/ and scores/.
    Mohler(IngestMohler),
    /// SciEntsBank XML tree.
    Seb(IngestSeb),
}

#[derive(Debug, Args)]
pub struct IngestMohler {
    pub root: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dedupe: bool,
}

#[derive(Debug, Args)]
pub struct IngestSeb {
    pub root: PathBuf,
    #[arg(long, value_parser = parse_seb_split)]
    pub split: SebSplit,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dedupe: bool,
}

fn parse_seb_split(s: &str) -> Result<SebSplit, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated part fractions summing to 1.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    pub fractions: Vec<f64>,
    #[arg(long)]
    pub unstratified: bool,
    #[arg(long, default_value_t = 5.0)]
    pub score_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Handcrafted,
    Fuzzy,
    Vecsim,
    All,
}

impl From<SetArg> for FeatureSet {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Handcrafted => FeatureSet::Handcrafted,
            SetArg::Fuzzy => FeatureSet::Fuzzy,
            SetArg::Vecsim => FeatureSet::VecSim,
            SetArg::All => FeatureSet::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SetArg::All)]
    pub set: SetArg,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub score_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PipelineArg {
    Head,
    Forest,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = PipelineArg::Head)]
    pub pipeline: PipelineArg,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    pub score_max: f64,
    /// Name recorded in the checkpoint; defaults to the input file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Timestamp recorded in the checkpoint; defaults to now.
    #[arg(long)]
    pub created_at: Option<String>,
    /// Write epoch records as NDJSON.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_restarts: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
    /// Feature set for the forest pipeline.
    #[arg(long, value_enum)]
    pub set: Option<SetArg>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scored CSV with `id` and `score` columns.
    #[arg(long)]
    pub pred: PathBuf,
    /// Labelled pair CSV.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub score_max: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
}
