//! Dynamic time warping between frame sequences.
//!
//! Step set `{(1,0), (0,1), (1,1)}` with no band constraint. Costs accumulate in `f64`.
//! When several predecessors tie during backtracking, the diagonal step wins, then the
//! vertical step (advance in `a`), then the horizontal one.

use ndarray::ArrayView2;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this count as zero in the cosine distance.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// `1 - u.v / (|u| |v|)`, defined as 0 when either norm is below [`ZERO_NORM`].
pub fn cosine_distance<F: Float>(u: &[F], v: &[F]) -> F {
    let (dot, nu, nv) = u
        .iter()
        .zip(v)
        .fold((F::zero(), F::zero(), F::zero()), |(d, a, b), (&x, &y)| {
            (d + x * y, a + x * x, b + y * y)
        });
    let eps = F::from(ZERO_NORM).unwrap();
    if nu.sqrt() < eps || nv.sqrt() < eps {
        F::zero()
    } else {
        // One square root of the product makes d(u, u) exactly zero.
        (F::one() - dot / (nu * nv).sqrt()).max(F::zero())
    }
}

pub fn euclidean_distance<F: Float>(u: &[F], v: &[F]) -> F {
    u.iter()
        .zip(v)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

impl Metric {
    pub fn distance(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Metric::Cosine => cosine_distance(u, v),
            Metric::Euclidean => euclidean_distance(u, v),
        }
    }
}

/// A monotone, contiguous warping path from `(0, 0)` to `(T_a - 1, T_b - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentPath {
    pub steps: Vec<(usize, usize)>,
    pub cost: f64,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Cost divided by path length.
    pub fn normalized_cost(&self) -> f64 {
        self.cost / self.steps.len() as f64
    }

    /// Index into `b` of the first step that touches frame `i` of `a`.
    pub fn first_match_for_a(&self, i: usize) -> Option<usize> {
        self.steps.iter().find(|s| s.0 == i).map(|s| s.1)
    }
}

fn rows_f64(x: ArrayView2<'_, f32>) -> Vec<Vec<f64>> {
    x.rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect()
}

pub fn dtw_align(a: ArrayView2<'_, f32>, b: ArrayView2<'_, f32>, metric: Metric) -> Result<AlignmentPath> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::invalid("cannot align an empty sequence"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let (ra, rb) = (rows_f64(a), rows_f64(b));
    let (ta, tb) = (ra.len(), rb.len());
    let mut acc = vec![0.0f64; ta * tb];
    let at = |i: usize, j: usize| i * tb + j;
    for i in 0..ta {
        for j in 0..tb {
            let local = metric.distance(&ra[i], &rb[j]);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[at(0, j - 1)],
                (_, 0) => acc[at(i - 1, 0)],
                _ => acc[at(i - 1, j - 1)]
                    .min(acc[at(i - 1, j)])
                    .min(acc[at(i, j - 1)]),
            };
            acc[at(i, j)] = local + best;
        }
    }

    let mut steps = Vec::with_capacity(ta + tb - 1);
    let (mut i, mut j) = (ta - 1, tb - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[at(i - 1, j - 1)];
                let vert = acc[at(i - 1, j)];
                let horiz = acc[at(i, j - 1)];
                if diag <= vert && diag <= horiz {
                    (i - 1, j - 1)
                } else if vert <= horiz {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    Ok(AlignmentPath {
        steps,
        cost: acc[at(ta - 1, tb - 1)],
    })
}

/// Path-length-normalized DTW cost.
pub fn dtw_distance(a: ArrayView2<'_, f32>, b: ArrayView2<'_, f32>, metric: Metric) -> Result<f64> {
    dtw_align(a, b, metric).map(|p| p.normalized_cost())
}
