use ndarray::{s, ArrayView2};

use super::cae::{Cae, CaeTape};
use super::losses::triplet_batch;
use super::{vstack, Architecture, Batch};
use crate::error::{Error, Result};
use crate::nn::Real;
use crate::pairing::FrameQuadruplet;

/// Three weight-tied CAE branches with a triplet loss on their bottlenecks.
#[derive(Clone, Debug, PartialEq)]
pub struct CTriamese<F> {
    pub cae: Cae<F>,
    pub margin: F,
}

struct Stacked<F> {
    tape: CaeTape<F>,
    speakers: Option<Vec<usize>>,
    targets: ndarray::Array2<F>,
}

impl<F: Real> CTriamese<F> {
    pub fn new(input_dim: usize, arch: &Architecture, speakers: Option<Vec<String>>, margin: f64, seed: u64) -> Result<Self> {
        if !(margin > 0.0 && margin < 2.0) {
            return Err(Error::invalid(format!("margin must lie in (0, 2), got {margin}")));
        }
        Ok(CTriamese {
            cae: Cae::new(input_dim, arch, speakers, seed)?,
            margin: F::lit(margin),
        })
    }

    pub fn zeros_like(&self) -> Self {
        CTriamese {
            cae: self.cae.zeros_like(),
            margin: self.margin,
        }
    }

    pub fn cast<G: Real>(&self) -> CTriamese<G> {
        CTriamese {
            cae: self.cae.cast(),
            margin: G::lit(self.margin.to_f64_lossless()),
        }
    }

    /// Runs the shared CAE once over `[x_a; x_b; x'_a]` with targets `[x_b; x_a; x'_b]`.
    fn stacked(&self, batch: &Batch<F>) -> Result<Stacked<F>> {
        let Batch::Quadruplets {
            x_a,
            x_b,
            x_neg,
            x_neg_b,
            speakers,
        } = batch
        else {
            return Err(Error::KindMismatch {
                expected: "quadruplets".into(),
                got: "other".into(),
            });
        };
        let b = x_a.nrows();
        if b == 0 {
            return Err(Error::Empty("batch"));
        }
        if x_b.nrows() != b || x_neg.nrows() != b || x_neg_b.nrows() != b {
            return Err(Error::invalid("quadruplet batch parts differ in length"));
        }
        let input = vstack(&[x_a.view(), x_b.view(), x_neg.view()])?;
        let targets = vstack(&[x_b.view(), x_a.view(), x_neg_b.view()])?;
        let speakers = speakers.as_ref().map(|[s1, s2, s3]| [s1.as_slice(), s2, s3].concat());
        let tape = self.cae.run(input.view(), speakers.as_deref())?;
        Ok(Stacked { tape, speakers, targets })
    }

    pub(crate) fn loss_and_grad(&self, batch: &Batch<F>) -> Result<(F, CTriamese<F>)> {
        let st = self.stacked(batch)?;
        let b = batch.len();
        let scale = F::one() / F::lit(b as f64);
        let diff = st.tape.output() - &st.targets;
        let recon = diff.iter().map(|&d| d * d).sum::<F>();
        let trip = triplet_batch(st.tape.bottleneck().view(), self.margin);
        let out_grad = diff * (F::lit(2.0) * scale);
        let code_grad = trip.grad * scale;
        let grads = self
            .cae
            .backprop(&st.tape, out_grad.view(), Some(code_grad.view()), st.speakers.as_deref())?;
        Ok((
            (recon + trip.loss) * scale,
            CTriamese {
                cae: grads,
                margin: F::zero(),
            },
        ))
    }

    pub(crate) fn kink_pattern(&self, batch: &Batch<F>) -> Result<Vec<bool>> {
        let st = self.stacked(batch)?;
        let mut out = Vec::new();
        st.tape.relu_pattern(&self.cae, &mut out);
        out.extend(triplet_batch(st.tape.bottleneck().view(), self.margin).active);
        Ok(out)
    }

    /// Per-branch reconstruction losses and the triplet loss for a single-item batch.
    pub(crate) fn terms(&self, batch: &Batch<F>) -> Result<[F; 4]> {
        let st = self.stacked(batch)?;
        let diff = st.tape.output() - &st.targets;
        let row = |i: usize| diff.slice(s![i, ..]).iter().map(|&d| d * d).sum::<F>();
        let code: ArrayView2<'_, F> = st.tape.bottleneck().view();
        let trip = triplet_batch(code, self.margin).loss;
        Ok([row(0), row(1), row(2), trip])
    }
}

/// Loss of one quadruplet: the three reconstruction terms `(x_a -> x_b)`, `(x_b -> x_a)`,
/// `(x'_a -> x'_b)` plus the triplet loss on the bottlenecks `(e_a, e_b, e'_a)`.
pub fn ctriamese_loss(model: &CTriamese<f64>, quad: &FrameQuadruplet) -> Result<f64> {
    let row = |v: &[f32]| ndarray::Array2::from_shape_vec((1, v.len()), super::to_real::<f64>(v).collect());
    let shape = |e: ndarray::ShapeError| Error::invalid(e.to_string());
    let t = &quad.triplet;
    let speakers = match &model.cae.speakers {
        Some(table) => Some([
            vec![table.index_of(&t.pair.speaker_b)?],
            vec![table.index_of(&t.pair.speaker_a)?],
            vec![table.index_of(&quad.neg_b_speaker)?],
        ]),
        None => None,
    };
    let batch = Batch::Quadruplets {
        x_a: row(&t.pair.x_a).map_err(shape)?,
        x_b: row(&t.pair.x_b).map_err(shape)?,
        x_neg: row(&t.x_neg).map_err(shape)?,
        x_neg_b: row(&quad.x_neg_b).map_err(shape)?,
        speakers,
    };
    Ok(model.terms(&batch)?.iter().sum())
}
