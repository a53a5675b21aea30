//! The `vars` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.
//! Settings resolve as flags over `--config` file over defaults, and the
//! effective configuration is written into every output directory.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vars_core::evaluation::ViewSubset;
use vars_core::model::{Aggregation, EncoderKind, TaskMode};

pub use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "vars", version, about = "Multi-view foul classification toolkit")]
pub struct Cli {
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (manifest plus clip payloads).
    Generate(GenerateArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
    /// Reassign train/valid/test splits, stratified on the offence label.
    Split(SplitArgs),
    /// Train a model; writes checkpoint, history and test metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Evaluate a checkpoint with subsets of the camera views.
    AblateViews(AblateViewsArgs),
    /// Train and evaluate one model per frame rate.
    AblateTemporal(AblateTemporalArgs),
    /// Top-2 predictions for one action.
    Predict(PredictArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Check model gradients against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    FramePool,
    TemporalConv,
}

impl From<EncoderArg> for EncoderKind {
    fn from(e: EncoderArg) -> Self {
        match e {
            EncoderArg::FramePool => EncoderKind::FramePool,
            EncoderArg::TemporalConv => EncoderKind::TemporalConv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Max,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Max => Aggregation::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Foul,
    Offence,
    Multi,
}

impl From<TaskArg> for TaskMode {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Foul => TaskMode::SingleFoul,
            TaskArg::Offence => TaskMode::SingleOffence,
            TaskArg::Multi => TaskMode::MultiTask,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassesArg {
    Uniform,
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for vars_core::dataset::Split {
    fn from(s: SplitArg) -> Self {
        use vars_core::dataset::Split;
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three comma-separated numbers, got {}", p.len()))
}

fn parse_subset(s: &str) -> Result<ViewSubset, String> {
    s.parse().map_err(|e: vars_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of actions.
    #[arg(long = "n")]
    pub n_actions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Probability that the live view shows the foul.
    #[arg(long)]
    pub live_p: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_enum)]
    pub classes: Option<ClassesArg>,
    /// Probabilities of 1, 2 and 3 replays, e.g. 0.75,0.2,0.05.
    #[arg(long, value_parser = parse_triple)]
    pub replays: Option<[f64; 3]>,
    /// Train, valid and test fractions, e.g. 0.8,0,0.2.
    #[arg(long, value_parser = parse_triple)]
    pub split: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also write stats.json and tables/stats.txt here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_triple, default_value = "0.8,0,0.2")]
    pub fractions: [f64; 3],
    /// Where to write the re-split manifest; defaults to rewriting --manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Model and optimiser flags shared by training commands.
#[derive(Debug, Args)]
pub struct TrainFlags {
    /// JSON file with optional `model` and `train` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderArg>,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub alpha_foul: Option<f64>,
    #[arg(long)]
    pub alpha_off: Option<f64>,
    /// Weight the loss by inverse class frequency.
    #[arg(long)]
    pub class_weighting: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 16.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct AblateViewsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subsets such as L,R1,L+R1,L+R1+R2.
    #[arg(long, value_delimiter = ',', value_parser = parse_subset)]
    pub subsets: Option<Vec<ViewSubset>>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 16.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct AblateTemporalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated frame rates.
    #[arg(long, value_delimiter = ',', default_value = "5,8,12,16")]
    pub fps: Vec<f64>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub action: String,
    /// View subset such as L+R1; all views when absent.
    #[arg(long, value_parser = parse_subset)]
    pub views: Option<ViewSubset>,
    #[arg(long, default_value_t = 16.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Manifest file or dataset directory; falls back to $MVF_DATA_DIR.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint to offer for prediction; repeatable.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, value_enum, default_value = "temporal-conv")]
    pub encoder: EncoderArg,
    #[arg(long, value_enum, default_value = "max")]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value = "multi")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Fail (exit 2) above this relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .is_test(cfg!(test))
        .try_init();
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
