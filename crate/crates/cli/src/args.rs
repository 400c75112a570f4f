use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emonmt_core::decode::BeamConfig;
use emonmt_core::emotion::Dimension;
use emonmt_core::harness::{SplitPaths, Variant};
use emonmt_core::model::{ModelConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "emonmt",
    version,
    about = "Emotion-conditioned machine translation experiments"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file; its entries override flags given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distribution summary of an emotion score file.
    Stats(StatsArgs),
    /// Learn a BPE vocabulary with the emotion tokens reserved.
    BpeTrain(BpeTrainArgs),
    /// Write the tagged corpora of one variant.
    Prepare(PrepareArgs),
    /// Train a model, keep every epoch checkpoint and write the k-best average.
    Train(TrainArgs),
    /// Translate a source file with a checkpoint.
    Translate(TranslateArgs),
    /// Corpus BLEU of a hypothesis file against one reference file.
    ScoreBleu(ScoreBleuArgs),
    /// Concordance correlation between two score files, per dimension.
    ScoreCcc(ScoreCccArgs),
    /// Run every variant end to end and write the results table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// NAME=IDS_FILE; repeat for several splits. Without any, all scores form one split.
    #[arg(long = "split", value_name = "NAME=FILE")]
    pub splits: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct BpeTrainArgs {
    /// Text files, one sentence per line.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 8000)]
    pub size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_src: PathBuf,
    #[arg(long)]
    pub train_tgt: PathBuf,
    /// Utterance IDs, one per line; defaults to line numbers.
    #[arg(long)]
    pub train_ids: Option<PathBuf>,
    #[arg(long)]
    pub dev_src: PathBuf,
    #[arg(long)]
    pub dev_tgt: PathBuf,
    #[arg(long)]
    pub dev_ids: Option<PathBuf>,
}

impl SplitArgs {
    pub fn train(&self) -> SplitPaths {
        SplitPaths {
            source: self.train_src.clone(),
            target: self.train_tgt.clone(),
            ids: self.train_ids.clone(),
        }
    }

    pub fn dev(&self) -> SplitPaths {
        SplitPaths {
            source: self.dev_src.clone(),
            target: self.dev_tgt.clone(),
            ids: self.dev_ids.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TestSplitArgs {
    #[arg(long)]
    pub test_src: PathBuf,
    #[arg(long)]
    pub test_tgt: PathBuf,
    #[arg(long)]
    pub test_ids: Option<PathBuf>,
}

impl TestSplitArgs {
    pub fn test(&self) -> SplitPaths {
        SplitPaths {
            source: self.test_src.clone(),
            target: self.test_tgt.clone(),
            ids: self.test_ids.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = ModelConfig::default().enc_layers)]
    pub enc_layers: usize,
    #[arg(long, default_value_t = ModelConfig::default().dec_layers)]
    pub dec_layers: usize,
    #[arg(long, default_value_t = ModelConfig::default().heads)]
    pub heads: usize,
    #[arg(long, default_value_t = ModelConfig::default().model_dim)]
    pub model_dim: usize,
    #[arg(long, default_value_t = ModelConfig::default().ff_dim)]
    pub ff_dim: usize,
    #[arg(long, default_value_t = ModelConfig::default().dropout)]
    pub dropout: f64,
    /// Longest source or target, in subword tokens.
    #[arg(long, default_value_t = ModelConfig::default().max_len)]
    pub max_len: usize,
}

impl ModelArgs {
    /// `vocab_size` is filled in from the vocabulary at training time.
    pub fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            enc_layers: self.enc_layers,
            dec_layers: self.dec_layers,
            heads: self.heads,
            model_dim: self.model_dim,
            ff_dim: self.ff_dim,
            dropout: self.dropout,
            max_len: self.max_len,
            vocab_size: 1,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = TrainConfig::default().warmup_steps)]
    pub warmup_steps: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().label_smoothing)]
    pub label_smoothing: f64,
    /// Checkpoints averaged, chosen by lowest dev loss.
    #[arg(long, default_value_t = TrainConfig::default().avg_top_k)]
    pub avg_top_k: usize,
    /// Multiplier on the warmup learning-rate schedule.
    #[arg(long, default_value_t = TrainConfig::default().peak_scale)]
    pub peak_scale: f64,
    /// Global gradient-norm clip; 0 disables it.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
}

impl OptimArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            warmup_steps: self.warmup_steps,
            batch_size: self.batch_size,
            epochs: self.epochs,
            label_smoothing: self.label_smoothing,
            avg_top_k: self.avg_top_k,
            peak_scale: self.peak_scale,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
        }
    }
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    #[arg(long, default_value_t = BeamConfig::default().beam_size)]
    pub beam_size: usize,
    /// Most tokens generated per sentence, end marker included.
    #[arg(long, default_value_t = BeamConfig::default().max_len)]
    pub max_decode_len: usize,
    #[arg(long, default_value_t = BeamConfig::default().length_penalty)]
    pub length_penalty: f64,
}

impl BeamArgs {
    pub fn config(&self) -> BeamConfig {
        BeamConfig {
            beam_size: self.beam_size,
            max_len: self.max_decode_len,
            length_penalty: self.length_penalty,
        }
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub splits: SplitArgs,
    #[command(flatten)]
    pub test: TestSplitArgs,
    /// Emotion score CSV; needed by every variant except baseline.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub variant: Variant,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub splits: SplitArgs,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Retrain even when matching checkpoints exist.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub ids: Option<PathBuf>,
    /// Tag each source with its binned score on `--dimension` before decoding.
    #[arg(long, requires = "dimension")]
    pub scores: Option<PathBuf>,
    #[arg(long, requires = "scores")]
    pub dimension: Option<Dimension>,
    /// Output file; one translation per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Write `id<TAB>translation` lines instead.
    #[arg(long)]
    pub tsv: bool,
    #[command(flatten)]
    pub beam: BeamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    Exp,
    None,
}

#[derive(Debug, Args)]
pub struct ScoreBleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value_t = SmoothingArg::Exp)]
    pub smoothing: SmoothingArg,
}

#[derive(Debug, Args)]
pub struct ScoreCccArgs {
    /// Predicted score CSV.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold score CSV; every gold ID must be predicted.
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub splits: SplitArgs,
    #[command(flatten)]
    pub test: TestSplitArgs,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = Variant::ALL)]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 8000)]
    pub bpe_size: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub beam: BeamArgs,
}
