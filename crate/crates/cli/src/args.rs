use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mobpat::ingest::RecordFormat;
use mobpat::predict::ModelKind;
use mobpat::som::Normalization;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mobpat", version, about = "Movement-pattern analytics over check-in records")]
pub struct Cli {
    /// Seed for every randomized step; 0 when absent
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw records into canonical CSV plus a location table
    Ingest(IngestArgs),
    /// Generate a synthetic population with ground truth
    Synth(SynthArgs),
    /// Build frequency, time-spent, sequence and time-oriented matrices
    Matrices(MatricesArgs),
    /// Train a SOM on per-object features and flag outstanding objects
    Cluster(ClusterArgs),
    /// Fit predictors on a temporal split and emit accuracy and flow maps
    Predict(PredictArgs),
    /// Accuracy through time for growing training histories
    Evaluate(EvaluateArgs),
    /// Render one SVG artifact from earlier outputs
    Render(RenderArgs),
    /// Re-run the command recorded in a run manifest
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::Matrices(_) => "matrices",
            Command::Cluster(_) => "cluster",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Render(_) => "render",
            Command::Replay(_) => "replay",
        }
    }
}

fn record_format(s: &str) -> Result<RecordFormat, String> {
    s.parse()
}

fn model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn normalization(s: &str) -> Result<Normalization, String> {
    s.parse()
}

fn positive_i64(s: &str) -> Result<i64, String> {
    match s.parse::<i64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Check-in records
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Record layout: canonical, mobile or vast
    #[arg(long, default_value = "canonical", value_parser = record_format)]
    pub format: RecordFormat,
    /// Location table (name,category,parent,x,y); locations are discovered from the records when absent
    #[arg(long, value_name = "FILE")]
    pub locations: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TimeArgs {
    /// Width of a time bin in seconds
    #[arg(long, default_value_t = 3600, value_parser = positive_i64)]
    pub bin_seconds: i64,
    /// A check-in counts as a stay until the next one or this many seconds
    #[arg(long, default_value_t = 7200, value_parser = positive_i64)]
    pub session_timeout: i64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Canonical records CSV; the location table goes next to it as `<stem>.locations.csv`
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Flat `key = value` config; built-in defaults when absent
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Records CSV; `<stem>.locations.csv` and `<stem>.truth.json` are written beside it
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Frequency,
    Timespent,
    Sequence,
    Tom,
    All,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MatricesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Matrices to build
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub which: Vec<MatrixKind>,
    /// Window start for frequency/time-spent (timestamp); data start when absent
    #[arg(long)]
    pub start: Option<String>,
    /// Window end, exclusive; end of the last bin when absent
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Lattice rows; ceil(sqrt(5·sqrt(N))) when absent
    #[arg(long)]
    pub rows: Option<usize>,
    /// Lattice columns; same default as rows
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr0: f64,
    #[arg(long, default_value_t = 0.02)]
    pub lr1: f64,
    /// Initial neighbourhood radius; half the longer side when absent
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub sigma1: f64,
    /// Feature scaling: zscore, minmax or none
    #[arg(long, default_value = "zscore", value_parser = normalization)]
    pub normalize: Normalization,
    /// Flag objects whose BMU U-value exceeds mean + k·std
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Comma-separated model kinds (rnn, uniform, most_frequent, knn, naive_bayes,
    /// decision_tree, random_forest, linear_svm, adaboost)
    #[arg(long, value_delimiter = ',', value_parser = model_kind, default_value = "rnn,most_frequent,uniform")]
    pub models: Vec<ModelKind>,
    /// History window in bins
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    #[arg(long, default_value_t = 16)]
    pub rnn_hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub rnn_epochs: usize,
    #[arg(long, default_value_t = 0.02)]
    pub rnn_lr: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Train on bins before this time, score bins from it on (timestamp)
    #[arg(long)]
    pub split_time: String,
    /// Bin whose flow maps are drawn; the split bin when absent
    #[arg(long)]
    pub target_bin: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training history lengths in minutes
    #[arg(long, value_delimiter = ',', required = true)]
    pub probe_minutes: Vec<u32>,
    /// Bin to predict
    #[arg(long, conflicts_with = "target_time", required_unless_present = "target_time")]
    pub target_bin: Option<usize>,
    /// Time whose bin is predicted (timestamp)
    #[arg(long)]
    pub target_time: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    /// `cluster.json` from `cluster`
    Umatrix,
    /// A frequency or time-spent CSV from `matrices`
    Heatmap,
    /// A flow JSON from `predict`
    Flowmap,
    /// Records plus `--objects`
    Timecube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampArg {
    Sequential,
    Diverging,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RenderArgs {
    #[arg(value_enum)]
    pub kind: ArtifactKind,
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Location table, for coordinates (flowmap, timecube)
    #[arg(long, value_name = "FILE")]
    pub locations: Option<PathBuf>,
    /// Record layout of `--in` (timecube)
    #[arg(long, default_value = "canonical", value_parser = record_format)]
    pub format: RecordFormat,
    /// Objects to draw (timecube)
    #[arg(long, value_delimiter = ',')]
    pub objects: Vec<String>,
    #[arg(long, default_value_t = 7200, value_parser = positive_i64)]
    pub session_timeout: i64,
    /// Divide heat-map values by 3600 (time-spent seconds to hours)
    #[arg(long)]
    pub hours: bool,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    #[arg(long, value_enum, default_value = "sequential")]
    pub ramp: RampArg,
    #[arg(long)]
    pub no_legend: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `manifest.json` written by an earlier run
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Skip checking that inputs still match their recorded digests
    #[arg(long)]
    pub no_verify: bool,
}
