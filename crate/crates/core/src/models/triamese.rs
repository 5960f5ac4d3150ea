use ndarray::ArrayView2;

use super::cae::relu_pattern;
use super::losses::triplet_batch;
use super::{vstack, Architecture};
use crate::error::{Error, Result};
use crate::nn::{backward, forward, init_parameters, Activation, NetworkSpec, ParamSet, Parameters, Real};

/// Three weight-tied branches, stored once, ending in a ReLU embedding layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Triamese<F> {
    pub branch_spec: NetworkSpec,
    pub branch: Parameters<F>,
    pub margin: F,
}

impl<F: Real> Triamese<F> {
    pub fn new(input_dim: usize, arch: &Architecture, margin: f64, seed: u64) -> Result<Self> {
        if !(margin > 0.0 && margin < 2.0) {
            return Err(Error::invalid(format!("margin must lie in (0, 2), got {margin}")));
        }
        let branch_spec = NetworkSpec::mlp(
            input_dim,
            arch.hidden_units,
            arch.hidden_layers,
            arch.embedding_dim,
            Activation::Relu,
            seed,
        );
        Ok(Triamese {
            branch: init_parameters(&branch_spec)?,
            branch_spec,
            margin: F::lit(margin),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Triamese {
            branch_spec: self.branch_spec.clone(),
            branch: Parameters::zeros(&self.branch_spec),
            margin: self.margin,
        }
    }

    pub fn cast<G: Real>(&self) -> Triamese<G> {
        Triamese {
            branch_spec: self.branch_spec.clone(),
            branch: self.branch.cast(),
            margin: G::lit(self.margin.to_f64_lossless()),
        }
    }

    /// Mean triplet loss; the branch is evaluated once on the stacked `3B` rows.
    pub(crate) fn loss_and_grad(
        &self,
        anchor: ArrayView2<'_, F>,
        positive: ArrayView2<'_, F>,
        negative: ArrayView2<'_, F>,
    ) -> Result<(F, Triamese<F>)> {
        let b = anchor.nrows();
        if b == 0 {
            return Err(Error::Empty("batch"));
        }
        if positive.nrows() != b || negative.nrows() != b {
            return Err(Error::invalid("triplet batch parts differ in length"));
        }
        let stacked = vstack(&[anchor, positive, negative])?;
        let acts = forward(&self.branch, &self.branch_spec, stacked.view())?;
        let out = triplet_batch(acts.last().expect("branch has layers").view(), self.margin);
        let scale = F::one() / F::lit(b as f64);
        let back = backward(&self.branch, &self.branch_spec, &acts, (out.grad * scale).view())?;
        Ok((
            out.loss * scale,
            Triamese {
                branch_spec: self.branch_spec.clone(),
                branch: back.grads,
                margin: F::zero(),
            },
        ))
    }

    pub(crate) fn kink_pattern(
        &self,
        anchor: ArrayView2<'_, F>,
        positive: ArrayView2<'_, F>,
        negative: ArrayView2<'_, F>,
    ) -> Result<Vec<bool>> {
        let stacked = vstack(&[anchor, positive, negative])?;
        let acts = forward(&self.branch, &self.branch_spec, stacked.view())?;
        let mut out = Vec::new();
        relu_pattern(&self.branch_spec, &acts, &mut out);
        out.extend(triplet_batch(acts.last().expect("branch has layers").view(), self.margin).active);
        Ok(out)
    }

    pub(crate) fn tensors(&self) -> Vec<&[F]> {
        self.branch.tensors()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        self.branch.tensors_mut()
    }
}
