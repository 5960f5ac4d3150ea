use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_all, Architecture, Batch, CTriamese, Cae, Checkpoint, Model, ModelKind, SpeakerTable, Triamese};
use crate::digest::short_digest;
use crate::error::{Error, Result};
use crate::evaluation::{same_different_ap, LabeledWord, SameDiffOptions};
use crate::features::FeatureSet;
use crate::nn::{OptimizerConfig, OptimizerState, ParamSet};
use crate::pairing::{FramePair, ItemKind, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EarlyStopping {
    FixedEpochs,
    /// Stop after `patience` epochs without a new best validation AP.
    ValidationAp { patience: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub margin: f64,
    pub early_stopping: EarlyStopping,
    pub speaker_conditioning: bool,
    pub architecture: Architecture,
    pub optimizer: OptimizerConfig,
    /// Epochs of plain autoencoder training (`x_a -> x_a`) before correspondence training.
    /// CAE and CTriamese only.
    pub autoencoder_pretrain_epochs: usize,
}

impl TrainConfig {
    /// Defaults for `kind`: Adadelta for the CAE-based models, SGD for Triamese.
    pub fn new(kind: ModelKind) -> Self {
        TrainConfig {
            kind,
            epochs: 10,
            batch_size: 256,
            seed: 0,
            margin: 0.15,
            early_stopping: EarlyStopping::ValidationAp { patience: 5 },
            speaker_conditioning: false,
            architecture: Architecture::standard(),
            optimizer: match kind {
                ModelKind::Triamese => OptimizerConfig::sgd(),
                _ => OptimizerConfig::adadelta(),
            },
            autoencoder_pretrain_epochs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return Err(Error::invalid(format!("margin must lie in (0, 2), got {}", self.margin)));
        }
        if self.kind == ModelKind::Triamese && self.speaker_conditioning {
            return Err(Error::invalid("the Triamese model has no decoder to condition on speakers"));
        }
        if self.kind == ModelKind::Triamese && self.autoencoder_pretrain_epochs > 0 {
            return Err(Error::invalid("autoencoder pretraining applies to CAE-based models only"));
        }
        if let EarlyStopping::ValidationAp { patience: 0 } = self.early_stopping {
            return Err(Error::invalid("patience must be positive"));
        }
        Ok(())
    }

    pub fn item_kind(&self) -> ItemKind {
        match self.kind {
            ModelKind::Cae => ItemKind::Pairs,
            ModelKind::Triamese => ItemKind::Triplets,
            ModelKind::CTriamese => ItemKind::Quadruplets,
        }
    }

    pub fn digest(&self) -> u32 {
        short_digest(self)
    }

    /// Freshly initialized model; `speakers` fills the speaker table when conditioning.
    pub fn init_model(&self, input_dim: usize, speakers: Vec<String>) -> Result<Model<f32>> {
        self.validate()?;
        let speakers = self.speaker_conditioning.then_some(speakers);
        let arch = &self.architecture;
        Ok(match self.kind {
            ModelKind::Cae => Model::Cae(Cae::new(input_dim, arch, speakers, self.seed)?),
            ModelKind::Triamese => Model::Triamese(Triamese::new(input_dim, arch, self.margin, self.seed)?),
            ModelKind::CTriamese => Model::CTriamese(CTriamese::new(input_dim, arch, speakers, self.margin, self.seed)?),
        })
    }
}

/// Held-out words scored with same-different AP after every epoch.
pub struct Validation<'a> {
    pub words: &'a [LabeledWord],
    pub features: &'a FeatureSet,
    pub options: SameDiffOptions,
}

impl Validation<'_> {
    pub fn score(&self, model: &Model<f32>) -> Result<f64> {
        let mut needed: Vec<&str> = self.words.iter().map(|w| w.segment.utterance_id.as_str()).collect();
        needed.sort_unstable();
        needed.dedup();
        let seqs = needed
            .iter()
            .map(|u| self.features.require(u).cloned())
            .collect::<Result<Vec<_>>>()?;
        let embedded = FeatureSet::new(extract_all(model, &seqs)?)?;
        Ok(same_different_ap(self.words, &embedded, &self.options)?.ap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-item training loss over the epoch.
    pub loss: f64,
    pub val_ap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Epoch the checkpoint was taken from when validating.
    pub best_epoch: Option<usize>,
}

/// Progress notifications from the training loop.
pub enum TrainEvent<'a> {
    Step { epoch: usize, loss: f64, model: &'a Model<f32> },
    Pretrain { epoch: usize, loss: f64 },
    Epoch(&'a EpochRecord),
}

pub fn train(set: &TrainingSet, config: &TrainConfig, validation: Option<&Validation<'_>>) -> Result<TrainOutcome> {
    train_with_observer(set, config, validation, |_| {})
}

struct Items<'a> {
    set: &'a TrainingSet,
    table: Option<SpeakerTable<f32>>,
}

impl Items<'_> {
    fn speaker(&self, name: &str) -> Result<usize> {
        self.table.as_ref().expect("conditioned").index_of(name)
    }

    fn rows<'b>(idx: &[usize], get: impl Fn(usize) -> &'b [f32]) -> Array2<f32> {
        let dim = get(idx[0]).len();
        let mut out = Array2::zeros((idx.len(), dim));
        for (mut row, &i) in out.outer_iter_mut().zip(idx) {
            row.assign(&ndarray::ArrayView1::from(get(i)));
        }
        out
    }

    fn speakers<'b>(&self, idx: &[usize], get: impl Fn(usize) -> &'b str) -> Result<Option<Vec<usize>>> {
        if self.table.is_none() {
            return Ok(None);
        }
        idx.iter().map(|&i| self.speaker(get(i))).collect::<Result<Vec<_>>>().map(Some)
    }

    fn pair(&self, i: usize) -> &FramePair {
        match self.set {
            TrainingSet::Pairs(v) => &v[i],
            TrainingSet::Triplets(v) => &v[i].pair,
            TrainingSet::Quadruplets(v) => &v[i].triplet.pair,
        }
    }

    /// `x_a -> x_a` batches for autoencoder pretraining.
    fn autoencoder_batch(&self, idx: &[usize]) -> Result<Batch<f32>> {
        let x = Self::rows(idx, |i| &self.pair(i).x_a);
        Ok(Batch::Pairs {
            input: x.clone(),
            target: x,
            speakers: self.speakers(idx, |i| &self.pair(i).speaker_a)?,
        })
    }

    fn batch(&self, idx: &[usize]) -> Result<Batch<f32>> {
        Ok(match self.set {
            TrainingSet::Pairs(v) => Batch::Pairs {
                input: Self::rows(idx, |i| &v[i].x_a),
                target: Self::rows(idx, |i| &v[i].x_b),
                speakers: self.speakers(idx, |i| &v[i].speaker_b)?,
            },
            TrainingSet::Triplets(v) => Batch::Triplets {
                anchor: Self::rows(idx, |i| &v[i].pair.x_a),
                positive: Self::rows(idx, |i| &v[i].pair.x_b),
                negative: Self::rows(idx, |i| &v[i].x_neg),
            },
            TrainingSet::Quadruplets(v) => Batch::Quadruplets {
                x_a: Self::rows(idx, |i| &v[i].triplet.pair.x_a),
                x_b: Self::rows(idx, |i| &v[i].triplet.pair.x_b),
                x_neg: Self::rows(idx, |i| &v[i].triplet.x_neg),
                x_neg_b: Self::rows(idx, |i| &v[i].x_neg_b),
                speakers: match self.table {
                    None => None,
                    Some(_) => Some([
                        self.speakers(idx, |i| &v[i].triplet.pair.speaker_b)?.expect("conditioned"),
                        self.speakers(idx, |i| &v[i].triplet.pair.speaker_a)?.expect("conditioned"),
                        self.speakers(idx, |i| &v[i].neg_b_speaker)?.expect("conditioned"),
                    ]),
                },
            },
        })
    }
}

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite training loss in epoch {epoch}")))
    }
}

/// Runs one epoch of minibatch updates over a fresh shuffle; returns the mean item loss.
fn run_epoch<P: ParamSet<f32>>(
    params: &mut P,
    optimizer: &mut OptimizerState<f32>,
    order: &mut [usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    mut step: impl FnMut(&P, &[usize]) -> Result<(f32, P)>,
    mut after: impl FnMut(&P, f64),
) -> Result<f64> {
    order.shuffle(rng);
    let mut total = 0.0;
    for chunk in order.chunks(batch_size) {
        let (loss, grads) = step(params, chunk)?;
        let loss = f64::from(loss);
        optimizer.step(params, &grads);
        total += loss * chunk.len() as f64;
        after(params, loss);
    }
    Ok(total / order.len() as f64)
}

/// [`train`] with a callback after every optimizer step and every epoch.
pub fn train_with_observer(
    set: &TrainingSet,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
    mut observe: impl FnMut(TrainEvent<'_>),
) -> Result<TrainOutcome> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if set.kind() != config.item_kind() {
        return Err(Error::KindMismatch {
            expected: config.item_kind().to_string(),
            got: set.kind().to_string(),
        });
    }
    let dim = set.dim().expect("non-empty set");
    let mut model = config.init_model(dim, set.speakers())?;
    let items = Items {
        set,
        table: model.speaker_table().cloned(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();

    if config.autoencoder_pretrain_epochs > 0 {
        let cae = match &mut model {
            Model::Cae(c) => c,
            Model::CTriamese(c) => &mut c.cae,
            Model::Triamese(_) => unreachable!("rejected by validate"),
        };
        let mut wrapped = Model::Cae(cae.clone());
        let mut optimizer = OptimizerState::new(config.optimizer);
        for epoch in 1..=config.autoencoder_pretrain_epochs {
            let loss = run_epoch(
                &mut wrapped,
                &mut optimizer,
                &mut order,
                config.batch_size,
                &mut rng,
                |m, idx| {
                    let lg = m.loss_and_grad(&items.autoencoder_batch(idx)?)?;
                    Ok((lg.loss, lg.grads))
                },
                |_, _| {},
            )?;
            check_finite(loss, epoch)?;
            observe(TrainEvent::Pretrain { epoch, loss });
        }
        let Model::Cae(trained) = wrapped else { unreachable!() };
        *cae = trained;
    }

    let mut optimizer = OptimizerState::new(config.optimizer);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model<f32>, OptimizerState<f32>)> = None;
    let mut stopped_early = false;
    for epoch in 1..=config.epochs {
        let loss = run_epoch(
            &mut model,
            &mut optimizer,
            &mut order,
            config.batch_size,
            &mut rng,
            |m, idx| {
                let lg = m.loss_and_grad(&items.batch(idx)?)?;
                Ok((lg.loss, lg.grads))
            },
            |m, loss| observe(TrainEvent::Step { epoch, loss, model: m }),
        )?;
        check_finite(loss, epoch)?;
        let val_ap = validation.map(|v| v.score(&model)).transpose()?;
        let record = EpochRecord { epoch, loss, val_ap };
        log::info!("epoch {epoch}: loss {loss:.6}{}", val_ap.map_or(String::new(), |ap| format!(", val AP {ap:.4}")));
        observe(TrainEvent::Epoch(&record));
        log.push(record);
        if let Some(ap) = val_ap {
            if best.as_ref().is_none_or(|(b, ..)| ap > *b) {
                best = Some((ap, epoch, model.clone(), optimizer.clone()));
            }
            let best_epoch = best.as_ref().expect("set above").1;
            if let EarlyStopping::ValidationAp { patience } = config.early_stopping {
                if epoch - best_epoch >= patience && epoch < config.epochs {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (model, optimizer, epoch, best_epoch) = match best {
        Some((_, e, m, o)) => (m, o, e, Some(e)),
        None => (model, optimizer, log.len(), None),
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            optimizer: Some(optimizer),
            epoch: epoch as u32,
            seed: config.seed,
            config_digest: config.digest(),
        },
        log,
        stopped_early,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{FrameQuadruplet, FrameTriplet};

    fn tiny(kind: ModelKind) -> TrainConfig {
        let mut c = TrainConfig::new(kind);
        c.architecture = Architecture {
            hidden_units: 6,
            hidden_layers: 1,
            embedding_dim: 3,
            speaker_dim: 2,
        };
        c.epochs = 3;
        c.batch_size = 4;
        c.early_stopping = EarlyStopping::FixedEpochs;
        c
    }

    fn pairs(n: usize) -> Vec<FramePair> {
        (0..n)
            .map(|i| {
                let x: Vec<f32> = (0..4).map(|j| ((i * 5 + j * 3) % 7) as f32 * 0.3 - 1.0).collect();
                FramePair {
                    x_b: x.iter().map(|v| v * 0.9).collect(),
                    x_a: x,
                    speaker_a: format!("s{}", i % 2),
                    speaker_b: format!("s{}", (i + 1) % 3),
                    cluster_id: (i % 3) as u32,
                }
            })
            .collect()
    }

    fn quads(n: usize) -> Vec<FrameQuadruplet> {
        pairs(n)
            .into_iter()
            .map(|p| FrameQuadruplet {
                triplet: FrameTriplet {
                    x_neg: p.x_b.iter().rev().copied().collect(),
                    neg_speaker: p.speaker_a.clone(),
                    neg_cluster: p.cluster_id + 1,
                    neg_segment: 0,
                    neg_frame: 0,
                    pair: p.clone(),
                },
                x_neg_b: p.x_a.iter().rev().copied().collect(),
                neg_b_speaker: p.speaker_b,
                neg_b_segment: 1,
            })
            .collect()
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(ModelKind::Cae);
        assert!(c.validate().is_ok());
        c.margin = 2.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(ModelKind::Triamese);
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(ModelKind::Triamese);
        c.speaker_conditioning = true;
        assert!(c.validate().is_err());
        assert!(matches!(TrainConfig::new(ModelKind::Triamese).optimizer, OptimizerConfig::Sgd { .. }));
    }

    #[test]
    fn rejects_mismatch_and_empty() {
        let set = TrainingSet::Pairs(pairs(5));
        assert!(matches!(train(&set, &tiny(ModelKind::Triamese), None), Err(Error::KindMismatch { .. })));
        assert!(matches!(train(&TrainingSet::Pairs(vec![]), &tiny(ModelKind::Cae), None), Err(Error::Empty(_))));
    }

    #[test]
    fn fixed_epochs_and_determinism() {
        let set = TrainingSet::Pairs(pairs(10));
        let a = train(&set, &tiny(ModelKind::Cae), None).unwrap();
        let b = train(&set, &tiny(ModelKind::Cae), None).unwrap();
        assert_eq!(a.log.len(), 3);
        assert_eq!(a.checkpoint.model, b.checkpoint.model);
        assert_eq!(a.checkpoint.epoch, 3);
        assert!(!a.stopped_early);
        let mut other = tiny(ModelKind::Cae);
        other.seed = 1;
        assert_ne!(train(&set, &other, None).unwrap().checkpoint.model, a.checkpoint.model);
    }

    #[test]
    fn conditioned_ctriamese_with_pretraining() {
        let set = TrainingSet::Quadruplets(quads(9));
        let mut c = tiny(ModelKind::CTriamese);
        c.speaker_conditioning = true;
        c.autoencoder_pretrain_epochs = 2;
        let mut pretrain = 0;
        let mut steps = 0;
        let out = train_with_observer(&set, &c, None, |e| match e {
            TrainEvent::Pretrain { .. } => pretrain += 1,
            TrainEvent::Step { .. } => steps += 1,
            TrainEvent::Epoch(_) => {}
        })
        .unwrap();
        assert_eq!(pretrain, 2);
        assert_eq!(steps, 3 * 3);
        let table = out.checkpoint.model.speaker_table().unwrap();
        assert_eq!(table.names, vec!["s0", "s1", "s2"]);
    }
}
