use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, Batch, CTriamese, Cae, Model, ModelKind, Triamese};
use crate::error::Result;
use crate::nn::{gradient_check, GradCheckReport, ParamSet, Probe};

/// A small `f64` model with a random batch, for comparing analytic gradients against finite
/// differences.
pub struct GradCheckInstance {
    pub model: Model<f64>,
    pub batch: Batch<f64>,
}

const SPEAKERS: [&str; 3] = ["spk_a", "spk_b", "spk_c"];

impl GradCheckInstance {
    /// Random parameters (biases included) and inputs. CAE and CTriamese instances are
    /// speaker-conditioned so the speaker table is checked too.
    pub fn random(kind: ModelKind, seed: u64) -> Result<Self> {
        let arch = Architecture {
            hidden_units: 7,
            hidden_layers: 2,
            embedding_dim: 4,
            speaker_dim: 3,
        };
        let (dim, b) = (5, 4);
        let names = || Some(SPEAKERS.iter().map(|s| s.to_string()).collect());
        let mut model = match kind {
            ModelKind::Cae => Model::Cae(Cae::new(dim, &arch, names(), seed)?),
            ModelKind::Triamese => Model::Triamese(Triamese::new(dim, &arch, 0.15, seed)?),
            ModelKind::CTriamese => Model::CTriamese(CTriamese::new(dim, &arch, names(), 0.15, seed)?),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let perturbed: Vec<f64> = model
            .flatten()
            .into_iter()
            .map(|w| w + rng.random_range(-0.1..0.1))
            .collect();
        model.assign_flat(&perturbed);
        let mut frames = || Array2::from_shape_fn((b, dim), |_| rng.random_range(-1.5..1.5));
        let batch = match kind {
            ModelKind::Cae => Batch::Pairs {
                input: frames(),
                target: frames(),
                speakers: Some((0..b).map(|i| i % SPEAKERS.len()).collect()),
            },
            ModelKind::Triamese => Batch::Triplets {
                anchor: frames(),
                positive: frames(),
                negative: frames(),
            },
            ModelKind::CTriamese => Batch::Quadruplets {
                x_a: frames(),
                x_b: frames(),
                x_neg: frames(),
                x_neg_b: frames(),
                speakers: Some([vec![0, 1, 2, 0], vec![1, 1, 0, 2], vec![2, 0, 1, 1]]),
            },
        };
        Ok(GradCheckInstance { model, batch })
    }

    pub fn check(&self, eps: f64, tolerance: f64) -> Result<GradCheckReport> {
        let analytic = self.model.loss_and_grad(&self.batch)?.grads.flatten();
        let theta = self.model.flatten();
        let mut scratch = self.model.clone();
        let mut failure = None;
        let report = gradient_check(&theta, &analytic, eps, tolerance, |t| {
            scratch.assign_flat(t);
            let probe = scratch
                .loss_and_grad(&self.batch)
                .and_then(|lg| Ok((lg.loss, scratch.kink_pattern(&self.batch)?)));
            match probe {
                Ok((loss, pattern)) => Probe { loss, pattern },
                Err(e) => {
                    failure.get_or_insert(e);
                    Probe::smooth(f64::NAN)
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(report),
        }
    }
}

/// Central-difference check (`eps = 1e-4`) of a seeded random instance of `kind`.
pub fn gradient_check_model(kind: ModelKind, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    GradCheckInstance::random(kind, seed)?.check(1e-4, tolerance)
}
