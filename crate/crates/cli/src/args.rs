use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use zrfl_core::features::CmvnMode;
use zrfl_core::pairing::SynthConfig;
use zrfl_core::{Metric, ModelKind};

/// Invalid flag combinations found after parsing; maps to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "zrfl", version, about = "Frame-level feature learning from discovered word pairs")]
pub struct Cli {
    /// Worker threads for alignment, extraction and evaluation; 0 uses every core.
    #[arg(long, global = true, env = "ZR_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// WAV files to a 39-dimensional MFCC + delta archive.
    Featurize(FeaturizeArgs),
    /// Discovered pairs to frame-level training items.
    Pairs(PairsArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Bottleneck or branch features from a checkpoint.
    Extract(ExtractArgs),
    /// Same-different AP or ABX error of a feature archive.
    Eval(EvalArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Cae,
    Triamese,
    Ctriamese,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Cae => ModelKind::Cae,
            ModelArg::Triamese => ModelKind::Triamese,
            ModelArg::Ctriamese => ModelKind::CTriamese,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmvnArg {
    PerSpeaker,
    PerUtterance,
}

impl From<CmvnArg> for CmvnMode {
    fn from(m: CmvnArg) -> Self {
        match m {
            CmvnArg::PerSpeaker => CmvnMode::PerSpeaker,
            CmvnArg::PerUtterance => CmvnMode::PerUtterance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Samediff,
    Abx,
}

#[derive(Args, Debug, Serialize)]
pub struct FeaturizeArgs {
    /// Directory of .wav files, or a text file listing one WAV path per line.
    #[arg(long)]
    pub wavs: PathBuf,
    /// `utterance_id<TAB>speaker_id` lines; utterance ids are WAV file stems.
    #[arg(long)]
    pub speakers: PathBuf,
    #[arg(long, value_enum, default_value_t = CmvnArg::PerSpeaker)]
    pub cmvn: CmvnArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PairsArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Discovered pair list.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub speakers: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Local distance for the frame alignment.
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.15)]
    pub margin: f64,
    /// Learning rate; defaults to 0.001 (Adadelta) or 0.01 (SGD for Triamese).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Held-out word list for validation AP and early stopping; needs `--features`.
    #[arg(long, requires = "features")]
    pub val_words: Option<PathBuf>,
    /// Archive holding the validation words.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Epochs without a new best validation AP before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Learn a vector per speaker and feed it to the decoder (CAE, CTriamese).
    #[arg(long)]
    pub speaker_conditioning: bool,
    /// Epochs of plain autoencoder training first (CAE, CTriamese).
    #[arg(long, default_value_t = 0)]
    pub pretrain_epochs: usize,
    /// Four 1000-unit layers and a 100-dimensional embedding (Triamese).
    #[arg(long)]
    pub wide: bool,
    /// Per-epoch CSV log; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Fail unless the checkpoint holds this model kind.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Word list (samediff) or ABX item list (abx).
    #[arg(long)]
    pub list: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    /// Score only word pairs from different speakers (samediff).
    #[arg(long)]
    pub cross_speaker_only: bool,
    /// Skip words shorter than this many frames (samediff).
    #[arg(long, default_value_t = 0)]
    pub min_frames: usize,
    /// Write the precision-recall curve here (samediff).
    #[arg(long)]
    pub pr_csv: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthConfig::default().n_types)]
    pub n_types: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_speakers)]
    pub n_speakers: usize,
    /// Speakers kept out of the pair list and used for the evaluation lists.
    #[arg(long, default_value_t = SynthConfig::default().held_out_speakers)]
    pub held_out: usize,
    #[arg(long, default_value_t = SynthConfig::default().words_per_speaker_per_type)]
    pub words_per_type: usize,
    /// Tokens per type for held-out speakers; 0 uses `--words-per-type`.
    #[arg(long, default_value_t = 0)]
    pub eval_words_per_type: usize,
    #[arg(long, default_value_t = SynthConfig::default().frames_range.0)]
    pub min_frames: usize,
    #[arg(long, default_value_t = SynthConfig::default().frames_range.1)]
    pub max_frames: usize,
    #[arg(long, default_value_t = SynthConfig::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().speaker_distortion)]
    pub speaker_distortion: f64,
    #[arg(long, default_value_t = SynthConfig::default().noise_sigma)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = SynthConfig::default().warp_strength)]
    pub warp_strength: f64,
    /// Fraction of pairs whose second word has the wrong type.
    #[arg(long, default_value_t = 0.0)]
    pub pair_corruption: f64,
    /// Fraction of cross-speaker pairs kept.
    #[arg(long, default_value_t = 1.0)]
    pub cross_speaker_pairs: f64,
    #[arg(long, default_value_t = SynthConfig::default().words_per_utterance)]
    pub words_per_utterance: usize,
    /// Strength of the dimension-mixing per-speaker warp.
    #[arg(long, default_value_t = 0.0)]
    pub speaker_warp: f64,
    /// Rank of the phonetic content subspace; 0 uses every dimension.
    #[arg(long, default_value_t = 0)]
    pub content_rank: usize,
    /// Normalize the generated features per speaker.
    #[arg(long)]
    pub cmvn: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            n_types: self.n_types,
            n_speakers: self.n_speakers,
            held_out_speakers: self.held_out,
            words_per_speaker_per_type: self.words_per_type,
            eval_words_per_speaker_per_type: self.eval_words_per_type,
            frames_range: (self.min_frames, self.max_frames),
            dim: self.dim,
            speaker_distortion: self.speaker_distortion,
            noise_sigma: self.noise_sigma,
            warp_strength: self.warp_strength,
            pair_corruption: self.pair_corruption,
            cross_speaker_pairs: self.cross_speaker_pairs,
            words_per_utterance: self.words_per_utterance,
            speaker_warp: self.speaker_warp,
            content_rank: self.content_rank,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    /// Check one model; all three by default.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}
