//! Reconstruction and triplet losses with their gradients.

use ndarray::{Array2, ArrayView2, Axis};

use crate::alignment::{cosine_distance, ZERO_NORM};
use crate::nn::Real;

/// Gradients of the cosine distance with respect to both arguments.
///
/// Zero when either norm is below [`ZERO_NORM`], matching the guarded distance.
pub fn cosine_distance_grad<F: Real>(u: &[F], v: &[F]) -> (Vec<F>, Vec<F>) {
    let dot: F = u.iter().zip(v).map(|(&x, &y)| x * y).sum();
    let nu2: F = u.iter().map(|&x| x * x).sum();
    let nv2: F = v.iter().map(|&x| x * x).sum();
    let (nu, nv) = (nu2.sqrt(), nv2.sqrt());
    let eps = F::lit(ZERO_NORM);
    if nu < eps || nv < eps {
        return (vec![F::zero(); u.len()], vec![F::zero(); v.len()]);
    }
    let inv = F::one() / (nu * nv);
    let sim = dot * inv;
    // d = 1 - sim, so each gradient is the negated similarity gradient
    let gu = u.iter().zip(v).map(|(&x, &y)| -(y * inv - sim * x / nu2)).collect();
    let gv = u.iter().zip(v).map(|(&x, &y)| -(x * inv - sim * y / nv2)).collect();
    (gu, gv)
}

/// `max{0, m + d_cos(e_a, e_b) - d_cos(e_a, e_neg)}`.
pub fn triplet_loss<F: Real>(e_a: &[F], e_b: &[F], e_neg: &[F], margin: F) -> F {
    let h = margin + cosine_distance(e_a, e_b) - cosine_distance(e_a, e_neg);
    h.max(F::zero())
}

/// Squared Euclidean reconstruction error `|x_hat - x_b|^2`.
pub fn reconstruction_loss<F: Real>(x_hat: &[F], x_b: &[F]) -> F {
    x_hat.iter().zip(x_b).map(|(&y, &t)| (y - t) * (y - t)).sum()
}

pub(crate) struct TripletBatch<F> {
    /// Sum of per-item losses.
    pub loss: F,
    /// Gradient of the summed loss, same layout as the embeddings.
    pub grad: Array2<F>,
    pub active: Vec<bool>,
}

/// Triplet losses over stacked embeddings `[anchors; positives; negatives]`, `3B x k`.
/// The hinge subgradient at exactly zero is zero.
pub(crate) fn triplet_batch<F: Real>(embeddings: ArrayView2<'_, F>, margin: F) -> TripletBatch<F> {
    let b = embeddings.nrows() / 3;
    let mut grad = Array2::zeros(embeddings.raw_dim());
    let mut loss = F::zero();
    let mut active = Vec::with_capacity(b);
    let row = |i: usize| embeddings.index_axis(Axis(0), i).to_vec();
    for i in 0..b {
        let (a, p, n) = (row(i), row(b + i), row(2 * b + i));
        let h = margin + cosine_distance(&a, &p) - cosine_distance(&a, &n);
        let on = h > F::zero();
        active.push(on);
        if !on {
            continue;
        }
        loss += h;
        let (ga_p, gp) = cosine_distance_grad(&a, &p);
        let (ga_n, gn) = cosine_distance_grad(&a, &n);
        for k in 0..a.len() {
            grad[[i, k]] += ga_p[k] - ga_n[k];
            grad[[b + i, k]] += gp[k];
            grad[[2 * b + i, k]] -= gn[k];
        }
    }
    TripletBatch { loss, grad, active }
}
