use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{FramePair, FrameQuadruplet, FrameTriplet, WordSegment};
use crate::alignment::{dtw_align, AlignmentPath, Metric};
use crate::error::Result;
use crate::features::FeatureSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SamplingSummary {
    pub emitted: usize,
    pub dropped: usize,
}

/// Adds a negative frame to every frame pair.
///
/// The negative word is drawn uniformly among `segments` spoken by `speaker_a` with a
/// different cluster, then the frame uniformly within that word. Pairs without an eligible
/// word are dropped and counted.
pub fn sample_triplets(
    frame_pairs: &[FramePair],
    segments: &[WordSegment],
    features: &FeatureSet,
    seed: u64,
) -> Result<(Vec<FrameTriplet>, SamplingSummary)> {
    let mut by_speaker: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        seg.validate(features)?;
        by_speaker.entry(seg.speaker_id.as_str()).or_default().push(i);
    }
    let mut eligible: HashMap<(&str, u32), Vec<usize>> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frame_pairs.len());
    let mut summary = SamplingSummary::default();
    for pair in frame_pairs {
        let key = (pair.speaker_a.as_str(), pair.cluster_id);
        let candidates = eligible.entry(key).or_insert_with(|| {
            by_speaker
                .get(key.0)
                .map(|ids| ids.iter().copied().filter(|&i| segments[i].cluster_id != key.1).collect())
                .unwrap_or_default()
        });
        if candidates.is_empty() {
            summary.dropped += 1;
            continue;
        }
        let neg_segment = candidates[rng.random_range(0..candidates.len())];
        let seg = &segments[neg_segment];
        let neg_frame = rng.random_range(0..seg.num_frames());
        let x_neg = features.require(&seg.utterance_id)?.frames.row(seg.start_frame + neg_frame).to_vec();
        out.push(FrameTriplet {
            pair: pair.clone(),
            x_neg,
            neg_speaker: seg.speaker_id.clone(),
            neg_cluster: seg.cluster_id,
            neg_segment,
            neg_frame,
        });
    }
    summary.emitted = out.len();
    Ok((out, summary))
}

/// Adds `x_neg_b` to every triplet from a fourth word of the negative's cluster.
///
/// The fourth word is drawn uniformly among `segments` with cluster `neg_cluster`, excluding
/// the negative word itself. It is DTW-aligned to the negative word and `x_neg_b` is the frame
/// on the first path step that touches the negative frame.
pub fn sample_quadruplets(
    triplets: &[FrameTriplet],
    segments: &[WordSegment],
    features: &FeatureSet,
    metric: Metric,
    seed: u64,
) -> Result<(Vec<FrameQuadruplet>, SamplingSummary)> {
    let mut by_cluster: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        seg.validate(features)?;
        by_cluster.entry(seg.cluster_id).or_default().push(i);
    }
    let mut paths: HashMap<(usize, usize), AlignmentPath> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(triplets.len());
    let mut summary = SamplingSummary::default();
    for trip in triplets {
        let third = trip.neg_segment;
        let pool = by_cluster.get(&trip.neg_cluster).map(Vec::as_slice).unwrap_or_default();
        let others = pool.iter().filter(|&&i| i != third).count();
        if others == 0 {
            summary.dropped += 1;
            continue;
        }
        let pick = rng.random_range(0..others);
        let fourth = *pool.iter().filter(|&&i| i != third).nth(pick).expect("pick < count");
        let (s3, s4) = (&segments[third], &segments[fourth]);
        let f3 = features.require(&s3.utterance_id)?;
        let f4 = features.require(&s4.utterance_id)?;
        let path = match paths.get(&(third, fourth)) {
            Some(p) => p,
            None => {
                let p = dtw_align(
                    f3.segment(s3.start_frame, s3.end_frame),
                    f4.segment(s4.start_frame, s4.end_frame),
                    metric,
                )?;
                paths.entry((third, fourth)).or_insert(p)
            }
        };
        let j = path
            .first_match_for_a(trip.neg_frame)
            .expect("every frame of the first sequence lies on the path");
        out.push(FrameQuadruplet {
            triplet: trip.clone(),
            x_neg_b: f4.frames.row(s4.start_frame + j).to_vec(),
            neg_b_speaker: s4.speaker_id.clone(),
            neg_b_segment: fourth,
        });
    }
    summary.emitted = out.len();
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSequence;
    use ndarray::Array2;

    fn corpus() -> (FeatureSet, Vec<WordSegment>) {
        let mk = |id: &str, base: f32| {
            FeatureSequence::new(id, Array2::from_shape_fn((12, 2), |(i, j)| base + i as f32 + j as f32 * 0.5), 100.0).unwrap()
        };
        let feats = FeatureSet::new(vec![mk("a1", 0.0), mk("a2", 3.0), mk("b1", -5.0), mk("b2", 1.0)]).unwrap();
        let seg = |utt: &str, spk: &str, cluster: u32, s: usize, e: usize| WordSegment {
            utterance_id: utt.into(),
            start_frame: s,
            end_frame: e,
            speaker_id: spk.into(),
            cluster_id: cluster,
        };
        let segments = vec![
            seg("a1", "A", 0, 0, 5),
            seg("a1", "A", 0, 5, 10),
            seg("b1", "B", 0, 0, 6),
            seg("b1", "B", 1, 6, 12),
            seg("b2", "B", 1, 0, 4),
            seg("a2", "A", 0, 2, 9),
        ];
        (feats, segments)
    }

    fn pair(spk: &str, cluster: u32) -> FramePair {
        FramePair {
            x_a: vec![1.0, 2.0],
            x_b: vec![1.0, 2.5],
            speaker_a: spk.into(),
            speaker_b: "B".into(),
            cluster_id: cluster,
        }
    }

    #[test]
    fn single_cluster_speaker_dropped() {
        let (feats, segs) = corpus();
        let pairs = vec![pair("A", 0), pair("B", 0), pair("A", 0)];
        let (trips, summary) = sample_triplets(&pairs, &segs, &feats, 1).unwrap();
        assert_eq!(summary, SamplingSummary { emitted: 1, dropped: 2 });
        assert_eq!(trips[0].pair.speaker_a, "B");
    }

    #[test]
    fn triplet_constraints_and_determinism() {
        let (feats, segs) = corpus();
        let pairs: Vec<_> = (0..40).map(|i| pair("B", (i % 2) as u32)).collect();
        let (t1, _) = sample_triplets(&pairs, &segs, &feats, 99).unwrap();
        let (t2, _) = sample_triplets(&pairs, &segs, &feats, 99).unwrap();
        assert_eq!(t1, t2);
        for t in &t1 {
            assert_ne!(t.neg_cluster, t.pair.cluster_id);
            assert_eq!(t.neg_speaker, t.pair.speaker_a);
            let seg = &segs[t.neg_segment];
            let row = feats.get(&seg.utterance_id).unwrap().frames.row(seg.start_frame + t.neg_frame).to_vec();
            assert_eq!(row, t.x_neg);
        }
    }

    #[test]
    fn lone_negative_cluster_word_dropped() {
        let (feats, mut segs) = corpus();
        segs.truncate(4); // cluster 1 now has a single word (index 3)
        let (trips, _) = sample_triplets(&[pair("B", 0)], &segs, &feats, 3).unwrap();
        assert_eq!(trips[0].neg_segment, 3);
        let (quads, summary) = sample_quadruplets(&trips, &segs, &feats, Metric::Cosine, 3).unwrap();
        assert!(quads.is_empty());
        assert_eq!(summary.dropped, 1);
    }

    #[test]
    fn identical_fourth_word_reuses_frame() {
        let frames = Array2::from_shape_fn((6, 2), |(i, j)| (i as f32 + 1.0) * if j == 0 { 1.0 } else { -0.3 });
        let feats = FeatureSet::new(vec![
            FeatureSequence::new("x", frames.clone(), 100.0).unwrap(),
            FeatureSequence::new("y", frames, 100.0).unwrap(),
        ])
        .unwrap();
        let seg = |utt: &str| WordSegment {
            utterance_id: utt.into(),
            start_frame: 0,
            end_frame: 6,
            speaker_id: "S".into(),
            cluster_id: 2,
        };
        let segs = vec![seg("x"), seg("y")];
        for neg_frame in 0..6 {
            let trip = FrameTriplet {
                pair: pair("S", 0),
                x_neg: feats.get("x").unwrap().frames.row(neg_frame).to_vec(),
                neg_speaker: "S".into(),
                neg_cluster: 2,
                neg_segment: 0,
                neg_frame,
            };
            let (quads, _) = sample_quadruplets(&[trip], &segs, &feats, Metric::Euclidean, 0).unwrap();
            assert_eq!(quads[0].x_neg_b, quads[0].triplet.x_neg);
            assert_eq!(quads[0].neg_b_segment, 1);
        }
    }

    #[test]
    fn quadruplet_cluster_constraint() {
        let (feats, segs) = corpus();
        let pairs: Vec<_> = (0..30).map(|i| pair(if i % 3 == 0 { "A" } else { "B" }, (i % 2) as u32)).collect();
        let (trips, _) = sample_triplets(&pairs, &segs, &feats, 5).unwrap();
        let (quads, _) = sample_quadruplets(&trips, &segs, &feats, Metric::Cosine, 5).unwrap();
        assert!(!quads.is_empty());
        for q in &quads {
            assert_eq!(segs[q.neg_b_segment].cluster_id, q.triplet.neg_cluster);
            assert_ne!(q.neg_b_segment, q.triplet.neg_segment);
        }
    }
}
