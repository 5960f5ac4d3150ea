//! Synthetic end-to-end comparison of the three models against raw features.
//!
//! A corpus is generated, normalized per speaker, paired, and used to train each model.
//! The evaluation speakers are split: the first few drive validation-based early stopping,
//! the rest score same-different AP and ABX error.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alignment::Metric;
use crate::error::Result;
use crate::evaluation::{abx_error, same_different_ap, AbxItem, LabeledWord, SameDiffOptions};
use crate::features::{apply_cmvn, CmvnMode, FeatureSet};
use crate::models::{extract_all, train, EarlyStopping, ModelKind, TrainConfig, Validation};
use crate::pairing::{
    build_frame_pairs, generate_synthetic_corpus, sample_quadruplets, sample_triplets, unique_segments, SynthConfig,
    TrainingSet,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendConfig {
    /// Corpus template; the seed is replaced per run.
    pub synth: SynthConfig,
    pub epochs: usize,
    pub adadelta_lr: f64,
    pub sgd_lr: f64,
    pub patience: usize,
    /// Held-out speakers used for validation instead of testing.
    pub validation_speakers: usize,
    pub margin: f64,
    pub ctriamese_speaker_conditioning: bool,
    pub models: Vec<ModelKind>,
}

impl TrendConfig {
    /// The recipe used by the acceptance suite.
    pub fn reference() -> Self {
        TrendConfig {
            synth: SynthConfig {
                n_types: 10,
                n_speakers: 13,
                held_out_speakers: 5,
                words_per_speaker_per_type: 3,
                eval_words_per_speaker_per_type: 6,
                speaker_distortion: 0.8,
                noise_sigma: 1.0,
                speaker_warp: 1.0,
                content_rank: 8,
                cross_speaker_pairs: 0.05,
                ..SynthConfig::default()
            },
            epochs: 15,
            adadelta_lr: 0.1,
            sgd_lr: 0.3,
            patience: 3,
            validation_speakers: 2,
            margin: 0.15,
            ctriamese_speaker_conditioning: true,
            models: ModelKind::ALL.to_vec(),
        }
    }

    pub fn train_config(&self, kind: ModelKind, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(kind);
        cfg.epochs = self.epochs;
        cfg.seed = seed;
        cfg.margin = self.margin;
        cfg.early_stopping = match self.patience {
            0 => EarlyStopping::FixedEpochs,
            patience => EarlyStopping::ValidationAp { patience },
        };
        cfg.optimizer = match kind {
            ModelKind::Triamese => cfg.optimizer.with_lr(self.sgd_lr),
            _ => cfg.optimizer.with_lr(self.adadelta_lr),
        };
        cfg.speaker_conditioning = kind == ModelKind::CTriamese && self.ctriamese_speaker_conditioning;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub kind: ModelKind,
    pub ap: f64,
    pub abx: f64,
    pub best_epoch: Option<usize>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRun {
    pub seed: u64,
    pub raw_ap: f64,
    pub raw_abx: f64,
    pub models: Vec<ModelScore>,
    pub seconds: f64,
}

impl TrendRun {
    pub fn score(&self, kind: ModelKind) -> Option<&ModelScore> {
        self.models.iter().find(|m| m.kind == kind)
    }
}

struct Prepared {
    features: FeatureSet,
    val_words: Vec<LabeledWord>,
    test_words: Vec<LabeledWord>,
    abx_items: Vec<AbxItem>,
    sets: Vec<(ModelKind, TrainingSet)>,
}

fn prepare(config: &TrendConfig, seed: u64) -> Result<Prepared> {
    let synth = SynthConfig {
        seed,
        ..config.synth.clone()
    };
    let corpus = generate_synthetic_corpus(&synth)?;
    let features = FeatureSet::new(apply_cmvn(&corpus.features, &corpus.speakers, CmvnMode::PerSpeaker)?)?;
    let n_val = config.validation_speakers.min(corpus.eval_speakers.len());
    let val_speakers = &corpus.eval_speakers[..n_val];
    let (val_words, test_words): (Vec<_>, Vec<_>) = corpus
        .eval_words
        .iter()
        .cloned()
        .partition(|w| val_speakers.contains(&w.segment.speaker_id));
    let abx_items = corpus
        .abx_items
        .iter()
        .filter(|i| !val_speakers.contains(&i.speaker_id))
        .cloned()
        .collect();
    let segments = unique_segments(&corpus.pairs);
    let pairs = build_frame_pairs(&corpus.pairs, &features, Metric::Cosine)?;
    let (triplets, _) = sample_triplets(&pairs, &segments, &features, seed)?;
    let (quads, _) = sample_quadruplets(&triplets, &segments, &features, Metric::Cosine, seed)?;
    let mut sets = Vec::new();
    for &kind in &config.models {
        let set = match kind {
            ModelKind::Cae => TrainingSet::Pairs(pairs.clone()),
            ModelKind::Triamese => TrainingSet::Triplets(triplets.clone()),
            ModelKind::CTriamese => TrainingSet::Quadruplets(quads.clone()),
        };
        sets.push((kind, set));
    }
    Ok(Prepared {
        features,
        val_words,
        test_words,
        abx_items,
        sets,
    })
}

/// Runs the whole comparison for one seed.
pub fn run_trend(config: &TrendConfig, seed: u64) -> Result<TrendRun> {
    let start = Instant::now();
    let data = prepare(config, seed)?;
    let opts = SameDiffOptions::default();
    let raw_ap = same_different_ap(&data.test_words, &data.features, &opts)?.ap;
    let raw_abx = abx_error(&data.abx_items, &data.features, Metric::Cosine)?.error;
    let validation = Validation {
        words: &data.val_words,
        features: &data.features,
        options: opts.clone(),
    };
    let use_val = config.patience > 0 && !data.val_words.is_empty();
    let mut models = Vec::new();
    for (kind, set) in &data.sets {
        let t = Instant::now();
        let cfg = config.train_config(*kind, seed);
        let out = train(set, &cfg, use_val.then_some(&validation))?;
        let emb = FeatureSet::new(extract_all(&out.checkpoint.model, data.features.sequences())?)?;
        let ap = same_different_ap(&data.test_words, &emb, &opts)?.ap;
        let abx = abx_error(&data.abx_items, &emb, Metric::Cosine)?.error;
        log::info!("seed {seed} {kind}: AP {ap:.4} ABX {abx:.4}");
        models.push(ModelScore {
            kind: *kind,
            ap,
            abx,
            best_epoch: out.best_epoch,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    Ok(TrendRun {
        seed,
        raw_ap,
        raw_abx,
        models,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Seed counts for the three orderings checked across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendTally {
    pub runs: usize,
    /// CAE AP strictly above raw AP.
    pub cae_beats_raw_ap: usize,
    /// CTriamese AP at least CAE AP.
    pub ctriamese_matches_cae_ap: usize,
    /// Triamese ABX error strictly below raw ABX error.
    pub triamese_beats_raw_abx: usize,
}

impl TrendTally {
    pub fn from_runs(runs: &[TrendRun]) -> Self {
        let mut tally = TrendTally {
            runs: runs.len(),
            ..TrendTally::default()
        };
        for run in runs {
            let cae = run.score(ModelKind::Cae);
            if cae.is_some_and(|c| c.ap > run.raw_ap) {
                tally.cae_beats_raw_ap += 1;
            }
            if let (Some(c), Some(ct)) = (cae, run.score(ModelKind::CTriamese)) {
                if ct.ap >= c.ap {
                    tally.ctriamese_matches_cae_ap += 1;
                }
            }
            if run.score(ModelKind::Triamese).is_some_and(|t| t.abx < run.raw_abx) {
                tally.triamese_beats_raw_abx += 1;
            }
        }
        tally
    }
}
