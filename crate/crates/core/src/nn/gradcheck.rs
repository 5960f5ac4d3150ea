/// One evaluation of a loss for the finite-difference checker.
#[derive(Clone, Debug)]
pub struct Probe {
    pub loss: f64,
    /// Which side of every kink (ReLU pre-activation, hinge) the evaluation fell on.
    /// A perturbation that flips any entry crossed a kink and is not compared.
    pub pattern: Vec<bool>,
}

impl Probe {
    pub fn smooth(loss: f64) -> Self {
        Probe {
            loss,
            pattern: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < self.tolerance
    }
}

/// Magnitudes below this are treated as exact zeros on both sides.
const NEGLIGIBLE: f64 = 1e-10;

/// `|a - n| / max(|a|, |n|)`, zero when both are negligible.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < NEGLIGIBLE {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares `analytic` against central differences of `eval` around `theta`.
pub fn gradient_check<E>(theta: &[f64], analytic: &[f64], eps: f64, tolerance: f64, mut eval: E) -> GradCheckReport
where
    E: FnMut(&[f64]) -> Probe,
{
    assert_eq!(theta.len(), analytic.len(), "gradient length");
    let base = eval(theta);
    let mut point = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped_kinks: 0,
        tolerance,
    };
    for i in 0..theta.len() {
        point[i] = theta[i] + eps;
        let plus = eval(&point);
        point[i] = theta[i] - eps;
        let minus = eval(&point);
        point[i] = theta[i];
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_index = Some(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::super::{backward, forward, init_parameters, Activation, NetworkSpec, ParamSet, Parameters};
    use super::*;
    use ndarray::Array2;

    fn quadratic_report(spec: &NetworkSpec, seed: u64) -> GradCheckReport {
        let params: Parameters<f64> = init_parameters(spec).unwrap();
        let x = Array2::from_shape_fn((4, spec.input_dim), |(i, j)| {
            ((i * 31 + j * 17 + seed as usize) % 13) as f64 / 6.0 - 1.0
        });
        let target = Array2::from_shape_fn((4, spec.output_dim()), |(i, j)| (i as f64 - j as f64) * 0.25);
        let loss_of = |p: &Parameters<f64>| -> (f64, Vec<Array2<f64>>) {
            let acts = forward(p, spec, x.view()).unwrap();
            let diff = acts.last().unwrap() - &target;
            (diff.mapv(|v| v * v).sum() / 4.0, acts)
        };
        let (_, acts) = loss_of(&params);
        let diff = acts.last().unwrap() - &target;
        let back = backward(&params, spec, &acts, (diff * 0.5).view()).unwrap();
        let theta = params.flatten();
        let mut scratch = params.clone();
        gradient_check(&theta, &back.grads.flatten(), 1e-4, 1e-4, |t| {
            scratch.assign_flat(t);
            let (loss, acts) = loss_of(&scratch);
            let pattern = acts[1..].iter().flat_map(|a| a.iter().map(|&v| v > 0.0).collect::<Vec<_>>()).collect();
            Probe { loss, pattern }
        })
    }

    #[test]
    fn linear_network_is_exact() {
        let spec = NetworkSpec {
            input_dim: 3,
            layer_sizes: vec![4, 2],
            activations: vec![Activation::Linear, Activation::Linear],
            seed: 5,
        };
        let report = quadratic_report(&spec, 1);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
        assert_eq!(report.skipped_kinks, 0);
    }

    #[test]
    fn relu_network_matches() {
        let spec = NetworkSpec::mlp(5, 7, 3, 3, Activation::Linear, 21);
        let report = quadratic_report(&spec, 2);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn constant_loss() {
        let theta = vec![0.3, -1.0, 2.0];
        let report = gradient_check(&theta, &[0.0; 3], 1e-4, 1e-4, |_| Probe::smooth(4.0));
        assert_eq!(report.max_rel_error, 0.0);
        assert!(report.passed());
    }
}
