//! Dense feed-forward networks with exact backpropagation.
//!
//! Everything is generic over [`Real`] so training runs in `f32` while gradient checks run
//! the same code in `f64`.

mod gradcheck;
mod network;
mod optim;

pub use gradcheck::{gradient_check, relative_error, GradCheckReport, Probe};
pub use network::{backward, forward, init_parameters, Activation, Backward, Layer, NetworkSpec, Parameters};
pub use optim::{OptimizerConfig, OptimizerState};

use std::fmt::{Debug, Display};

/// Scalar types the networks can be instantiated with.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("representable")
    }

    fn to_f64_lossless(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A collection of parameter tensors visited in a fixed order.
///
/// Gradients use the same type as the parameters they belong to, so optimizers and
/// gradient checks can walk both in lockstep.
pub trait ParamSet<F> {
    fn tensors(&self) -> Vec<&[F]>;
    fn tensors_mut(&mut self) -> Vec<&mut [F]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<F>
    where
        F: Copy,
    {
        self.tensors().into_iter().flat_map(|t| t.iter().copied()).collect()
    }

    /// Overwrites every parameter from `flat`, which must hold [`ParamSet::num_params`] values.
    fn assign_flat(&mut self, flat: &[F])
    where
        F: Copy,
    {
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
    }
}
