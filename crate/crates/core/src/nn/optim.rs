use serde::{Deserialize, Serialize};

use super::{ParamSet, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    /// Adadelta with a global learning-rate multiplier on the update.
    Adadelta { lr: f64, rho: f64, eps: f64 },
    /// Plain SGD with inverse per-step decay `lr / (1 + decay * t)`.
    Sgd { lr: f64, decay: f64 },
}

impl OptimizerConfig {
    pub const fn adadelta() -> Self {
        OptimizerConfig::Adadelta {
            lr: 0.001,
            rho: 0.95,
            eps: 1e-6,
        }
    }

    pub const fn sgd() -> Self {
        OptimizerConfig::Sgd { lr: 0.01, decay: 1e-6 }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            OptimizerConfig::Adadelta { rho, eps, .. } => OptimizerConfig::Adadelta { lr, rho, eps },
            OptimizerConfig::Sgd { decay, .. } => OptimizerConfig::Sgd { lr, decay },
        }
    }
}

/// Optimizer configuration plus its running state.
///
/// For Adadelta, `grad_sq` holds E[g^2] and `update_sq` holds E[dx^2] per parameter; the
/// accumulators are allocated on the first step.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<F> {
    pub config: OptimizerConfig,
    pub step: u64,
    pub grad_sq: Vec<Vec<F>>,
    pub update_sq: Vec<Vec<F>>,
}

impl<F: Real> OptimizerState<F> {
    pub fn new(config: OptimizerConfig) -> Self {
        OptimizerState {
            config,
            step: 0,
            grad_sq: Vec::new(),
            update_sq: Vec::new(),
        }
    }

    /// Learning rate applied by the next SGD step.
    pub fn current_lr(&self) -> f64 {
        match self.config {
            OptimizerConfig::Sgd { lr, decay } => lr / (1.0 + decay * self.step as f64),
            OptimizerConfig::Adadelta { lr, .. } => lr,
        }
    }

    pub fn step<P: ParamSet<F>>(&mut self, params: &mut P, grads: &P) {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        assert_eq!(params.len(), grads.len(), "parameter/gradient tensor count");
        match self.config {
            OptimizerConfig::Sgd { .. } => {
                let lr = F::lit(self.current_lr());
                for (p, g) in params.iter_mut().zip(&grads) {
                    for (w, &dw) in p.iter_mut().zip(g.iter()) {
                        *w -= lr * dw;
                    }
                }
            }
            OptimizerConfig::Adadelta { lr, rho, eps } => {
                if self.grad_sq.is_empty() {
                    self.grad_sq = grads.iter().map(|g| vec![F::zero(); g.len()]).collect();
                    self.update_sq = self.grad_sq.clone();
                }
                let (lr, rho, eps) = (F::lit(lr), F::lit(rho), F::lit(eps));
                let keep = F::one() - rho;
                for (((p, g), eg), ex) in params
                    .iter_mut()
                    .zip(&grads)
                    .zip(self.grad_sq.iter_mut())
                    .zip(self.update_sq.iter_mut())
                {
                    for (((w, &dw), eg), ex) in p.iter_mut().zip(g.iter()).zip(eg.iter_mut()).zip(ex.iter_mut()) {
                        *eg = rho * *eg + keep * dw * dw;
                        let update = (*ex + eps).sqrt() / (*eg + eps).sqrt() * dw;
                        // the accumulator tracks the unscaled update; lr only scales the applied step
                        *ex = rho * *ex + keep * update * update;
                        *w -= lr * update;
                    }
                }
            }
        }
        self.step += 1;
    }
}
