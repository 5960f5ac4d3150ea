use rayon::prelude::*;

use super::{DiscoveredPair, FramePair};
use crate::alignment::{dtw_align, Metric};
use crate::error::Result;
use crate::features::FeatureSet;

/// DTW-aligns every discovered pair and emits one frame pair per path step in each direction.
///
/// Output order: for each discovered pair in input order, the `first -> second` pairs in path
/// order followed by the `second -> first` pairs.
pub fn build_frame_pairs(pairs: &[DiscoveredPair], features: &FeatureSet, metric: Metric) -> Result<Vec<FramePair>> {
    let per_pair: Vec<Vec<FramePair>> = pairs
        .par_iter()
        .map(|p| {
            let a = features.require(&p.first.utterance_id)?.segment(p.first.start_frame, p.first.end_frame);
            let b = features.require(&p.second.utterance_id)?.segment(p.second.start_frame, p.second.end_frame);
            let path = dtw_align(a, b, metric)?;
            let mut out = Vec::with_capacity(2 * path.len());
            for &(i, j) in &path.steps {
                out.push(FramePair {
                    x_a: a.row(i).to_vec(),
                    x_b: b.row(j).to_vec(),
                    speaker_a: p.first.speaker_id.clone(),
                    speaker_b: p.second.speaker_id.clone(),
                    cluster_id: p.cluster_id(),
                });
            }
            for &(i, j) in &path.steps {
                out.push(FramePair {
                    x_a: b.row(j).to_vec(),
                    x_b: a.row(i).to_vec(),
                    speaker_a: p.second.speaker_id.clone(),
                    speaker_b: p.first.speaker_id.clone(),
                    cluster_id: p.cluster_id(),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSequence;
    use crate::pairing::WordSegment;
    use ndarray::Array2;

    fn seg(utt: &str, start: usize, end: usize, spk: &str) -> WordSegment {
        WordSegment {
            utterance_id: utt.into(),
            start_frame: start,
            end_frame: end,
            speaker_id: spk.into(),
            cluster_id: 4,
        }
    }

    #[test]
    fn identical_segments_give_ten_pairs() {
        let frames = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f32 + 1.0);
        let feats = FeatureSet::new(vec![
            FeatureSequence::new("a", frames.clone(), 100.0).unwrap(),
            FeatureSequence::new("b", frames, 100.0).unwrap(),
        ])
        .unwrap();
        let pairs = vec![DiscoveredPair {
            first: seg("a", 0, 5, "s1"),
            second: seg("b", 0, 5, "s2"),
        }];
        let fp = build_frame_pairs(&pairs, &feats, Metric::Cosine).unwrap();
        assert_eq!(fp.len(), 10);
        assert!(fp.iter().all(|p| p.x_a == p.x_b && p.cluster_id == 4));
        assert_eq!(fp[0].speaker_a, "s1");
        assert_eq!(fp[5].speaker_a, "s2");
    }

    #[test]
    fn unequal_lengths_respect_path_bounds() {
        let feats = FeatureSet::new(vec![FeatureSequence::new(
            "u",
            Array2::from_shape_fn((10, 2), |(i, j)| ((i * 7 + j * 3) % 5) as f32 - 2.0),
            100.0,
        )
        .unwrap()])
        .unwrap();
        let pairs = vec![DiscoveredPair {
            first: seg("u", 0, 3, "s"),
            second: seg("u", 4, 9, "s"),
        }];
        let n = build_frame_pairs(&pairs, &feats, Metric::Cosine).unwrap().len();
        assert!((10..=14).contains(&n) && n.is_multiple_of(2), "{n}");
    }
}
