use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ParamSet, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply<F: Real>(self, z: &mut Array2<F>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
        }
    }

    /// Multiplies `grad` by the derivative, read off the layer output. ReLU'(0) = 0.
    fn backprop<F: Real>(self, grad: &mut Array2<F>, output: &Array2<F>) {
        if self == Activation::Relu {
            Zip::from(grad).and(output).for_each(|g, &a| {
                if a <= F::zero() {
                    *g = F::zero();
                }
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl NetworkSpec {
    /// `hidden` ReLU layers of `units` each, then an output layer.
    pub fn mlp(input_dim: usize, units: usize, hidden: usize, output_dim: usize, output: Activation, seed: u64) -> Self {
        let mut layer_sizes = vec![units; hidden];
        layer_sizes.push(output_dim);
        let mut activations = vec![Activation::Relu; hidden];
        activations.push(output);
        NetworkSpec {
            input_dim,
            layer_sizes,
            activations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() || self.layer_sizes.len() != self.activations.len() {
            return Err(Error::invalid("network needs at least one layer and one activation per layer"));
        }
        if self.input_dim == 0 || self.layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        std::iter::once(self.input_dim)
            .chain(self.layer_sizes.iter().copied())
            .zip(self.layer_sizes.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<F> {
    /// `out x in`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<F> {
    pub layers: Vec<Layer<F>>,
}

impl<F: Real> Parameters<F> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Parameters {
            layers: spec
                .shapes()
                .map(|(fan_in, fan_out)| Layer {
                    weight: Array2::zeros((fan_out, fan_in)),
                    bias: Array1::zeros(fan_out),
                })
                .collect(),
        }
    }

    pub fn cast<G: Real>(&self) -> Parameters<G> {
        let conv = |v: &F| G::lit(v.to_f64_lossless());
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.map(conv),
                    bias: l.bias.map(conv),
                })
                .collect(),
        }
    }

    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.layers.len() == spec.layer_sizes.len()
            && self
                .layers
                .iter()
                .zip(spec.shapes())
                .all(|(l, (i, o))| l.weight.dim() == (o, i) && l.bias.len() == o)
    }
}

impl<F: Real> ParamSet<F> for Parameters<F> {
    fn tensors(&self) -> Vec<&[F]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("contiguous"),
                ]
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("contiguous"),
                ]
            })
            .collect()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_parameters<F: Real>(spec: &NetworkSpec) -> Result<Parameters<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut params = Parameters::zeros(spec);
    for (layer, (fan_in, fan_out)) in params.layers.iter_mut().zip(spec.shapes()) {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new(-bound, bound).expect("positive bound");
        layer.weight.mapv_inplace(|_| F::lit(dist.sample(&mut rng)));
    }
    Ok(params)
}

/// Layer activations `[a0 = x, a1, ..., aL]` for a `B x in` batch.
pub fn forward<F: Real>(params: &Parameters<F>, spec: &NetworkSpec, batch: ArrayView2<'_, F>) -> Result<Vec<Array2<F>>> {
    if batch.ncols() != spec.input_dim {
        return Err(Error::DimMismatch {
            expected: spec.input_dim,
            got: batch.ncols(),
        });
    }
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    acts.push(batch.to_owned());
    for (layer, act) in params.layers.iter().zip(&spec.activations) {
        let prev = acts.last().expect("input pushed");
        let mut z = prev.dot(&layer.weight.t());
        z += &layer.bias;
        act.apply(&mut z);
        acts.push(z);
    }
    Ok(acts)
}

pub struct Backward<F> {
    pub grads: Parameters<F>,
    /// Gradient with respect to the network input, `B x in`.
    pub input_grad: Array2<F>,
}

/// Reverse-mode pass. `output_grad` is dLoss/d(output) for the whole batch; parameter
/// gradients are sums over the batch.
pub fn backward<F: Real>(
    params: &Parameters<F>,
    spec: &NetworkSpec,
    activations: &[Array2<F>],
    output_grad: ArrayView2<'_, F>,
) -> Result<Backward<F>> {
    let depth = params.layers.len();
    if activations.len() != depth + 1 {
        return Err(Error::invalid("activations do not come from this network"));
    }
    let out = &activations[depth];
    if output_grad.dim() != out.dim() {
        return Err(Error::DimMismatch {
            expected: out.ncols(),
            got: output_grad.ncols(),
        });
    }
    let mut grads = Parameters::zeros(spec);
    let mut delta = output_grad.to_owned();
    for l in (0..depth).rev() {
        spec.activations[l].backprop(&mut delta, &activations[l + 1]);
        grads.layers[l].weight = delta.t().dot(&activations[l]).as_standard_layout().into_owned();
        grads.layers[l].bias = delta.sum_axis(Axis(0));
        delta = delta.dot(&params.layers[l].weight);
    }
    Ok(Backward {
        grads,
        input_grad: delta,
    })
}
