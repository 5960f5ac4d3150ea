//! The correspondence autoencoder, Triamese and CTriamese models.
//!
//! All three are trained from DTW-aligned frame pairs. The CAE reconstructs the aligned
//! partner frame, the Triamese network pulls same-type embeddings together relative to a
//! negative under a cosine-distance hinge, and the CTriamese network applies that hinge to the
//! bottlenecks of three weight-tied CAE branches.

mod cae;
mod checkpoint;
mod ctriamese;
mod gradcheck;
mod losses;
mod train;
mod triamese;

use ndarray::{Array2, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::nn::{forward, ParamSet, Parameters, Real};

pub use cae::{cae_loss, Cae};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use ctriamese::{ctriamese_loss, CTriamese};
pub use gradcheck::{gradient_check_model, GradCheckInstance};
pub use losses::{cosine_distance_grad, reconstruction_loss, triplet_loss};
pub use train::{train, train_with_observer, EarlyStopping, EpochRecord, TrainConfig, TrainEvent, TrainOutcome, Validation};
pub use triamese::Triamese;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cae,
    Triamese,
    CTriamese,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cae, ModelKind::Triamese, ModelKind::CTriamese];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cae => "cae",
            ModelKind::Triamese => "triamese",
            ModelKind::CTriamese => "ctriamese",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::Cae => 0,
            ModelKind::Triamese => 1,
            ModelKind::CTriamese => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind '{s}'")))
    }
}

/// Layer sizes shared by all model kinds; the input dimension comes from the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub embedding_dim: usize,
    pub speaker_dim: usize,
}

impl Architecture {
    /// Six 100-unit ReLU layers around a 39-dimensional embedding; 100-dim speaker vectors.
    pub const fn standard() -> Self {
        Architecture {
            hidden_units: 100,
            hidden_layers: 6,
            embedding_dim: 39,
            speaker_dim: 100,
        }
    }

    /// Four 1000-unit layers and a 100-dimensional embedding (Triamese only).
    pub const fn wide_triamese() -> Self {
        Architecture {
            hidden_units: 1000,
            hidden_layers: 4,
            embedding_dim: 100,
            speaker_dim: 100,
        }
    }
}

/// Learned per-speaker vectors, rows indexed by sorted speaker name.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerTable<F> {
    pub names: Vec<String>,
    pub vectors: Array2<F>,
}

impl<F: Real> SpeakerTable<F> {
    /// Vectors drawn from `Uniform(-0.05, 0.05)`.
    pub fn new(mut names: Vec<String>, dim: usize, seed: u64) -> Self {
        names.sort();
        names.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-0.05, 0.05).expect("valid range");
        let vectors = Array2::from_shape_fn((names.len(), dim), |_| F::lit(dist.sample(&mut rng)));
        SpeakerTable { names, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn index_of(&self, speaker: &str) -> Result<usize> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(speaker))
            .map_err(|_| Error::UnknownSpeaker(speaker.to_string()))
    }

    pub fn zeros_like(&self) -> Self {
        SpeakerTable {
            names: self.names.clone(),
            vectors: Array2::zeros(self.vectors.raw_dim()),
        }
    }

    pub fn cast<G: Real>(&self) -> SpeakerTable<G> {
        SpeakerTable {
            names: self.names.clone(),
            vectors: self.vectors.map(|v| G::lit(v.to_f64_lossless())),
        }
    }
}

/// One minibatch; the variant must match the model kind.
#[derive(Clone, Debug)]
pub enum Batch<F> {
    /// CAE input/target frames, plus target speaker indices when speaker-conditioned.
    Pairs {
        input: Array2<F>,
        target: Array2<F>,
        speakers: Option<Vec<usize>>,
    },
    Triplets {
        anchor: Array2<F>,
        positive: Array2<F>,
        negative: Array2<F>,
    },
    /// Target speakers per branch: `x_b`'s, `x_a`'s and `x'_b`'s.
    Quadruplets {
        x_a: Array2<F>,
        x_b: Array2<F>,
        x_neg: Array2<F>,
        x_neg_b: Array2<F>,
        speakers: Option<[Vec<usize>; 3]>,
    },
}

impl<F> Batch<F> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Pairs { input, .. } => input.nrows(),
            Batch::Triplets { anchor, .. } => anchor.nrows(),
            Batch::Quadruplets { x_a, .. } => x_a.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Batch::Pairs { .. } => "pairs",
            Batch::Triplets { .. } => "triplets",
            Batch::Quadruplets { .. } => "quadruplets",
        }
    }
}

/// Loss value and gradients for one batch.
pub struct LossGrad<F> {
    /// Mean per-item loss.
    pub loss: F,
    pub grads: Model<F>,
}

/// A model of any kind. Gradients share this type.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<F> {
    Cae(Cae<F>),
    Triamese(Triamese<F>),
    CTriamese(CTriamese<F>),
}

/// The parameter sets one branch evaluates with.
#[derive(Debug, PartialEq)]
pub struct BranchView<'a, F> {
    pub networks: Vec<&'a Parameters<F>>,
}

impl<F: Real> Model<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cae(_) => ModelKind::Cae,
            Model::Triamese(_) => ModelKind::Triamese,
            Model::CTriamese(_) => ModelKind::CTriamese,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Cae(m) => m.encoder_spec.input_dim,
            Model::Triamese(m) => m.branch_spec.input_dim,
            Model::CTriamese(m) => m.cae.encoder_spec.input_dim,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self {
            Model::Cae(m) => m.encoder_spec.output_dim(),
            Model::Triamese(m) => m.branch_spec.output_dim(),
            Model::CTriamese(m) => m.cae.encoder_spec.output_dim(),
        }
    }

    pub fn speaker_table(&self) -> Option<&SpeakerTable<F>> {
        match self {
            Model::Cae(m) => m.speakers.as_ref(),
            Model::Triamese(_) => None,
            Model::CTriamese(m) => m.cae.speakers.as_ref(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Model::Cae(m) => Model::Cae(m.zeros_like()),
            Model::Triamese(m) => Model::Triamese(m.zeros_like()),
            Model::CTriamese(m) => Model::CTriamese(m.zeros_like()),
        }
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        match self {
            Model::Cae(m) => Model::Cae(m.cast()),
            Model::Triamese(m) => Model::Triamese(m.cast()),
            Model::CTriamese(m) => Model::CTriamese(m.cast()),
        }
    }

    fn mismatch(&self, batch: &Batch<F>) -> Error {
        Error::KindMismatch {
            expected: match self.kind() {
                ModelKind::Cae => "pairs",
                ModelKind::Triamese => "triplets",
                ModelKind::CTriamese => "quadruplets",
            }
            .into(),
            got: batch.kind_name().into(),
        }
    }

    pub fn loss_and_grad(&self, batch: &Batch<F>) -> Result<LossGrad<F>> {
        match (self, batch) {
            (Model::Cae(m), Batch::Pairs { input, target, speakers }) => {
                let (loss, grads) = m.loss_and_grad(input.view(), target.view(), speakers.as_deref())?;
                Ok(LossGrad {
                    loss,
                    grads: Model::Cae(grads),
                })
            }
            (Model::Triamese(m), Batch::Triplets { anchor, positive, negative }) => {
                let (loss, grads) = m.loss_and_grad(anchor.view(), positive.view(), negative.view())?;
                Ok(LossGrad {
                    loss,
                    grads: Model::Triamese(grads),
                })
            }
            (Model::CTriamese(m), batch @ Batch::Quadruplets { .. }) => {
                let (loss, grads) = m.loss_and_grad(batch)?;
                Ok(LossGrad {
                    loss,
                    grads: Model::CTriamese(grads),
                })
            }
            _ => Err(self.mismatch(batch)),
        }
    }

    /// Sides of every ReLU and hinge kink for this batch.
    pub fn kink_pattern(&self, batch: &Batch<F>) -> Result<Vec<bool>> {
        match (self, batch) {
            (Model::Cae(m), Batch::Pairs { input, speakers, .. }) => m.kink_pattern(input.view(), speakers.as_deref()),
            (Model::Triamese(m), Batch::Triplets { anchor, positive, negative }) => {
                m.kink_pattern(anchor.view(), positive.view(), negative.view())
            }
            (Model::CTriamese(m), batch @ Batch::Quadruplets { .. }) => m.kink_pattern(batch),
            _ => Err(self.mismatch(batch)),
        }
    }

    /// Embeddings for a batch of frames; speaker identity is never consulted.
    pub fn embed(&self, frames: ArrayView2<'_, F>) -> Result<Array2<F>> {
        let (spec, params) = match self {
            Model::Cae(m) => (&m.encoder_spec, &m.encoder),
            Model::Triamese(m) => (&m.branch_spec, &m.branch),
            Model::CTriamese(m) => (&m.cae.encoder_spec, &m.cae.encoder),
        };
        Ok(forward(params, spec, frames)?.pop().expect("at least one layer"))
    }

    /// The parameter sets used by each weight-tied branch: three for Triamese and CTriamese,
    /// one for the CAE.
    pub fn branch_views(&self) -> Vec<BranchView<'_, F>> {
        match self {
            Model::Cae(m) => vec![BranchView {
                networks: vec![&m.encoder, &m.decoder],
            }],
            Model::Triamese(m) => (0..3)
                .map(|_| BranchView {
                    networks: vec![&m.branch],
                })
                .collect(),
            Model::CTriamese(m) => (0..3)
                .map(|_| BranchView {
                    networks: vec![&m.cae.encoder, &m.cae.decoder],
                })
                .collect(),
        }
    }
}

impl<F: Real> ParamSet<F> for Model<F> {
    fn tensors(&self) -> Vec<&[F]> {
        match self {
            Model::Cae(m) => m.tensors(),
            Model::Triamese(m) => m.tensors(),
            Model::CTriamese(m) => m.cae.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        match self {
            Model::Cae(m) => m.tensors_mut(),
            Model::Triamese(m) => m.tensors_mut(),
            Model::CTriamese(m) => m.cae.tensors_mut(),
        }
    }
}

/// Bottleneck (CAE, CTriamese) or branch (Triamese) features for one sequence.
pub fn extract_features(model: &Model<f32>, seq: &FeatureSequence) -> Result<FeatureSequence> {
    if seq.dim() != model.input_dim() {
        return Err(Error::DimMismatch {
            expected: model.input_dim(),
            got: seq.dim(),
        });
    }
    let out = model.embed(seq.frames.view())?;
    FeatureSequence::new(seq.utterance_id.clone(), out, seq.frame_rate_hz)
}

/// [`extract_features`] over many sequences in parallel; output order follows the input.
pub fn extract_all(model: &Model<f32>, sequences: &[FeatureSequence]) -> Result<Vec<FeatureSequence>> {
    sequences.par_iter().map(|s| extract_features(model, s)).collect()
}

pub(crate) fn to_real<F: Real>(x: &[f32]) -> impl Iterator<Item = F> + '_ {
    x.iter().map(|&v| F::lit(f64::from(v)))
}

/// Stacks rows vertically.
pub(crate) fn vstack<F: Real>(parts: &[ArrayView2<'_, F>]) -> Result<Array2<F>> {
    ndarray::concatenate(ndarray::Axis(0), parts).map_err(|e| Error::invalid(format!("batch shape: {e}")))
}
