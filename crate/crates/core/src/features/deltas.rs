use ndarray::{s, Array2};

use super::FeatureSequence;
use crate::error::Result;

pub const DELTA_WINDOW: usize = 2;

/// Regression deltas over +-[`DELTA_WINDOW`] frames with edge replication.
fn regression(x: &Array2<f32>) -> Array2<f32> {
    let (t, d) = x.dim();
    let n = DELTA_WINDOW as isize;
    let denom: f64 = 2.0 * (1..=n).map(|k| (k * k) as f64).sum::<f64>();
    let clamp = |i: isize| i.clamp(0, t as isize - 1) as usize;
    Array2::from_shape_fn((t, d), |(ti, j)| {
        let ti = ti as isize;
        let num: f64 = (1..=n)
            .map(|k| k as f64 * (f64::from(x[[clamp(ti + k), j]]) - f64::from(x[[clamp(ti - k), j]])))
            .sum();
        (num / denom) as f32
    })
}

/// Appends first- and second-order deltas: output is `static | delta | delta-delta`.
pub fn add_deltas(seq: &FeatureSequence) -> Result<FeatureSequence> {
    let (t, d) = seq.frames.dim();
    let delta = regression(&seq.frames);
    let delta2 = regression(&delta);
    let mut out = Array2::zeros((t, 3 * d));
    out.slice_mut(s![.., 0..d]).assign(&seq.frames);
    out.slice_mut(s![.., d..2 * d]).assign(&delta);
    out.slice_mut(s![.., 2 * d..]).assign(&delta2);
    FeatureSequence::new(seq.utterance_id.clone(), out, seq.frame_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn constant_sequence_has_zero_deltas() {
        let seq = FeatureSequence::new("u", Array2::from_elem((7, 3), 2.5), 100.0).unwrap();
        let out = add_deltas(&seq).unwrap();
        assert_eq!(out.dim(), 9);
        assert!(out.frames.slice(s![.., 3..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_ramp_interior() {
        let v = Array1::from(vec![0.5f32, -1.0, 2.0]);
        let t = 12;
        let frames = Array2::from_shape_fn((t, 3), |(i, j)| i as f32 * v[j]);
        let out = add_deltas(&FeatureSequence::new("u", frames, 100.0).unwrap()).unwrap();
        for i in 2..t - 2 {
            for j in 0..3 {
                assert!((out.frames[[i, 3 + j]] - v[j]).abs() < 1e-6);
            }
        }
        // delta-delta needs its own delta window to be interior as well
        for i in 4..t - 4 {
            for j in 0..3 {
                assert!(out.frames[[i, 6 + j]].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_frame_sequence() {
        let seq = FeatureSequence::new("u", Array2::ones((1, 2)), 100.0).unwrap();
        let out = add_deltas(&seq).unwrap();
        assert_eq!(out.frames.dim(), (1, 6));
    }

    #[test]
    fn padding_only_touches_edges() {
        // two constant runs joined: deltas are nonzero only near the junction
        let frames = Array2::from_shape_fn((20, 1), |(i, _)| if i < 10 { 1.0 } else { 4.0 });
        let out = add_deltas(&FeatureSequence::new("u", frames, 100.0).unwrap()).unwrap();
        for i in (0..6).chain(14..20) {
            assert_eq!(out.frames[[i, 1]], 0.0);
            assert_eq!(out.frames[[i, 2]], 0.0);
        }
    }
}
