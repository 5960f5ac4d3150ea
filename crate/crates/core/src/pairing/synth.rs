//! Desk-scale synthetic corpus: smooth word-type prototypes, time-warped tokens, per-speaker
//! affine distortion and white noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DiscoveredPair, WordSegment};
use crate::error::{Error, Result};
use crate::evaluation::{AbxItem, LabeledWord};
use crate::features::{FeatureSequence, SpeakerMap, FRAME_RATE_HZ};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_types: usize,
    /// Total speakers, including the held-out ones.
    pub n_speakers: usize,
    /// Speakers excluded from the pair list and used for the evaluation lists. With 0, the
    /// evaluation lists cover every speaker.
    pub held_out_speakers: usize,
    pub words_per_speaker_per_type: usize,
    /// Tokens per type for each held-out speaker; 0 uses `words_per_speaker_per_type`.
    pub eval_words_per_speaker_per_type: usize,
    /// Inclusive token length range in frames.
    pub frames_range: (usize, usize),
    pub dim: usize,
    /// Speaker scale is drawn from `[1 - d, 1 + d]` per dimension, offset from `N(0, d^2)`.
    pub speaker_distortion: f64,
    pub noise_sigma: f64,
    /// Log-normal spread of per-frame time-warp increments; 0 resamples uniformly.
    pub warp_strength: f64,
    /// Fraction of emitted pairs whose second word is replaced by a word of another type.
    pub pair_corruption: f64,
    /// Fraction of cross-speaker same-type pairs kept in the pair list; same-speaker pairs
    /// are always kept. Term discovery finds mostly same-speaker matches.
    pub cross_speaker_pairs: f64,
    pub words_per_utterance: usize,
    /// Strength of a per-speaker linear warp `x -> x + a_s G x` shared in form across speakers
    /// (`G` fixed, `a_s` uniform in `[-w, w]`). Unlike the affine distortion it mixes
    /// dimensions, so per-dimension normalization cannot undo it.
    pub speaker_warp: f64,
    /// Rank of the subspace holding phonetic content; the remaining directions carry only
    /// speaker offsets and noise. 0 or `>= dim` puts content in every dimension.
    pub content_rank: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_types: 6,
            n_speakers: 6,
            held_out_speakers: 2,
            words_per_speaker_per_type: 3,
            eval_words_per_speaker_per_type: 0,
            frames_range: (20, 35),
            dim: 39,
            speaker_distortion: 0.5,
            noise_sigma: 0.3,
            warp_strength: 0.4,
            pair_corruption: 0.0,
            cross_speaker_pairs: 1.0,
            words_per_utterance: 4,
            speaker_warp: 0.0,
            content_rank: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("synthetic corpus: {msg}")));
        if self.n_types < 2 {
            return bad("n_types must be at least 2");
        }
        if self.n_speakers < 1 {
            return bad("n_speakers must be at least 1");
        }
        if self.held_out_speakers > 0 && self.held_out_speakers >= self.n_speakers {
            return bad("held_out_speakers must leave at least one training speaker");
        }
        if self.words_per_speaker_per_type < 1 || self.words_per_utterance < 1 {
            return bad("word counts must be positive");
        }
        if self.frames_range.0 < 1 || self.frames_range.0 > self.frames_range.1 {
            return bad("frames_range must be a nonempty range of positive lengths");
        }
        if self.dim < 1 {
            return bad("dim must be positive");
        }
        if !(0.0..1.0).contains(&self.speaker_distortion) {
            return bad("speaker_distortion must lie in [0, 1)");
        }
        if !(self.noise_sigma >= 0.0 && self.warp_strength >= 0.0) {
            return bad("noise_sigma and warp_strength must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.pair_corruption) {
            return bad("pair_corruption must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.cross_speaker_pairs) {
            return bad("cross_speaker_pairs must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn train_speaker_count(&self) -> usize {
        self.n_speakers - self.held_out_speakers
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub features: Vec<FeatureSequence>,
    pub speakers: SpeakerMap,
    /// Every token with its gold type label.
    pub words: Vec<LabeledWord>,
    /// Gold type label of each cluster id.
    pub type_labels: Vec<String>,
    pub pairs: Vec<DiscoveredPair>,
    /// Whether both words of each pair share a gold type.
    pub pair_is_correct: Vec<bool>,
    pub eval_words: Vec<LabeledWord>,
    pub abx_items: Vec<AbxItem>,
    pub train_speakers: Vec<String>,
    pub eval_speakers: Vec<String>,
}

/// Triphone label of type `k`: types come in minimal-pair groups of two sharing both
/// context phones.
fn type_label(k: usize) -> String {
    let group = k / 2;
    format!("l{group}-m{k}-r{group}")
}

fn interpolate(points: &[Vec<f64>], u: f64, out: &mut [f64]) {
    let n = points.len();
    let pos = (u * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    let w = 0.5 - 0.5 * (std::f64::consts::PI * frac).cos();
    for (o, (a, b)) in out.iter_mut().zip(points[i].iter().zip(&points[i + 1])) {
        *o = a * (1.0 - w) + b * w;
    }
}

pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let rank = if config.content_rank == 0 { dim } else { config.content_rank.min(dim) };
    let basis: Option<Vec<Vec<f64>>> = (rank < dim).then(|| {
        let sd = (1.0 / rank as f64).sqrt();
        (0..dim)
            .map(|_| (0..rank).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            }).collect())
            .collect()
    });
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let z: Vec<f64> = (0..rank).map(|_| StandardNormal.sample(rng)).collect();
        match &basis {
            Some(b) => b.iter().map(|row| row.iter().zip(&z).map(|(p, v)| p * v).sum()).collect(),
            None => z,
        }
    };

    // two control points per phone; left/right contexts per group, one middle per type
    let groups = config.n_types.div_ceil(2);
    let phone = |rng: &mut ChaCha8Rng| vec![gaussian(rng), gaussian(rng)];
    let lefts: Vec<_> = (0..groups).map(|_| phone(&mut rng)).collect();
    let middles: Vec<_> = (0..config.n_types).map(|_| phone(&mut rng)).collect();
    let rights: Vec<_> = (0..groups).map(|_| phone(&mut rng)).collect();
    let prototypes: Vec<Vec<Vec<f64>>> = (0..config.n_types)
        .map(|k| {
            let group = k / 2;
            [&lefts[group], &middles[k], &rights[group]]
                .into_iter()
                .flat_map(|p| p.iter().cloned())
                .collect()
        })
        .collect();
    let type_labels: Vec<String> = (0..config.n_types).map(type_label).collect();

    let d = config.speaker_distortion;
    let offset_dist = Normal::new(0.0, d).map_err(|e| Error::invalid(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let speaker_ids: Vec<String> = (0..config.n_speakers).map(|s| format!("spk{s:02}")).collect();
    let transforms: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n_speakers)
        .map(|_| {
            let scale = (0..dim).map(|_| if d > 0.0 { rng.random_range(1.0 - d..=1.0 + d) } else { 1.0 }).collect();
            let offset = (0..dim).map(|_| offset_dist.sample(&mut rng)).collect();
            (scale, offset)
        })
        .collect();

    let warps: Option<(Vec<Vec<f64>>, Vec<f64>)> = (config.speaker_warp > 0.0).then(|| {
        let sd = (1.0 / dim as f64).sqrt();
        let g = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sd * z
                    })
                    .collect()
            })
            .collect();
        let w = config.speaker_warp;
        let alphas = (0..config.n_speakers).map(|_| rng.random_range(-w..=w)).collect();
        (g, alphas)
    });

    let gap = 3;
    let mut features = Vec::new();
    let mut speakers = SpeakerMap::new();
    let mut words = Vec::new();
    let mut frame = vec![0.0; dim];
    for (s, speaker) in speaker_ids.iter().enumerate() {
        let (scale, offset) = &transforms[s];
        let per_type = if config.held_out_speakers > 0 && s >= config.train_speaker_count() && config.eval_words_per_speaker_per_type > 0 {
            config.eval_words_per_speaker_per_type
        } else {
            config.words_per_speaker_per_type
        };
        let mut tokens: Vec<usize> = (0..config.n_types)
            .flat_map(|k| std::iter::repeat_n(k, per_type))
            .collect();
        tokens.shuffle(&mut rng);
        for (u, chunk) in tokens.chunks(config.words_per_utterance).enumerate() {
            let utt = format!("{speaker}_u{u:03}");
            let mut rows: Vec<f32> = Vec::new();
            let emit = |base: &[f64], rng: &mut ChaCha8Rng, rows: &mut Vec<f32>| {
                let warped: Vec<f64>;
                let base = match &warps {
                    Some((g, alphas)) => {
                        warped = g
                            .iter()
                            .zip(base)
                            .map(|(row, &b)| b + alphas[s] * row.iter().zip(base).map(|(w, v)| w * v).sum::<f64>())
                            .collect();
                        &warped[..]
                    }
                    None => base,
                };
                for j in 0..dim {
                    rows.push((base[j] * scale[j] + offset[j] + noise.sample(rng)) as f32);
                }
            };
            let silence = vec![0.0; dim];
            let mut t = 0;
            for _ in 0..gap {
                emit(&silence, &mut rng, &mut rows);
            }
            t += gap;
            for &k in chunk {
                let len = rng.random_range(config.frames_range.0..=config.frames_range.1);
                let increments: Vec<f64> = (0..len)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (config.warp_strength * z).exp()
                    })
                    .collect();
                let total: f64 = increments[1..].iter().sum();
                let mut pos = 0.0;
                for (i, inc) in increments.iter().enumerate() {
                    if i > 0 {
                        pos += inc;
                    }
                    let u = if len == 1 { 0.5 } else { pos / total };
                    interpolate(&prototypes[k], u, &mut frame);
                    emit(&frame, &mut rng, &mut rows);
                }
                words.push(LabeledWord {
                    segment: WordSegment {
                        utterance_id: utt.clone(),
                        start_frame: t,
                        end_frame: t + len,
                        speaker_id: speaker.clone(),
                        cluster_id: k as u32,
                    },
                    gold_type: type_labels[k].clone(),
                });
                t += len;
                for _ in 0..gap {
                    emit(&silence, &mut rng, &mut rows);
                }
                t += gap;
            }
            let frames = ndarray::Array2::from_shape_vec((t, dim), rows).expect("row-major frames");
            features.push(FeatureSequence::new(utt.clone(), frames, FRAME_RATE_HZ)?);
            speakers.insert(utt, speaker.clone());
        }
    }

    let n_train = config.train_speaker_count();
    let train_speakers = speaker_ids[..n_train].to_vec();
    let eval_speakers = if config.held_out_speakers == 0 {
        speaker_ids.clone()
    } else {
        speaker_ids[n_train..].to_vec()
    };
    let train_words: Vec<&LabeledWord> = words
        .iter()
        .filter(|w| train_speakers.contains(&w.segment.speaker_id))
        .collect();

    let mut pairs = Vec::new();
    for (i, a) in train_words.iter().enumerate() {
        for b in &train_words[i + 1..] {
            let keep = a.segment.speaker_id == b.segment.speaker_id
                || config.cross_speaker_pairs >= 1.0
                || rng.random_bool(config.cross_speaker_pairs);
            if a.segment.cluster_id == b.segment.cluster_id && keep {
                pairs.push(DiscoveredPair {
                    first: a.segment.clone(),
                    second: b.segment.clone(),
                });
            }
        }
    }
    let mut pair_is_correct = vec![true; pairs.len()];
    let n_corrupt = (config.pair_corruption * pairs.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    for &p in order.iter().take(n_corrupt) {
        let cluster = pairs[p].first.cluster_id;
        let others: Vec<&&LabeledWord> = train_words.iter().filter(|w| w.segment.cluster_id != cluster).collect();
        let replacement = others[rng.random_range(0..others.len())];
        let mut second = replacement.segment.clone();
        second.cluster_id = cluster;
        pairs[p].second = second;
        pair_is_correct[p] = false;
    }

    let eval_words: Vec<LabeledWord> = words
        .iter()
        .filter(|w| eval_speakers.contains(&w.segment.speaker_id))
        .cloned()
        .collect();
    let abx_items = eval_words
        .iter()
        .map(|w| AbxItem {
            segment: w.segment.clone(),
            triphone_label: w.gold_type.clone(),
            speaker_id: w.segment.speaker_id.clone(),
        })
        .collect();

    Ok(SyntheticCorpus {
        features,
        speakers,
        words,
        type_labels,
        pairs,
        pair_is_correct,
        eval_words,
        abx_items,
        train_speakers,
        eval_speakers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{dtw_distance, Metric};
    use crate::features::FeatureSet;

    #[test]
    fn clean_tokens_are_identical() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            speaker_distortion: 0.0,
            warp_strength: 0.0,
            frames_range: (20, 20),
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic_corpus(&cfg).unwrap();
        let feats = FeatureSet::new(corpus.features.clone()).unwrap();
        for p in corpus.pairs.iter().take(50) {
            let a = feats.get(&p.first.utterance_id).unwrap().segment(p.first.start_frame, p.first.end_frame);
            let b = feats.get(&p.second.utterance_id).unwrap().segment(p.second.start_frame, p.second.end_frame);
            assert_eq!(a, b);
            assert_eq!(dtw_distance(a, b, Metric::Euclidean).unwrap(), 0.0);
        }
    }

    #[test]
    fn seeded_corpus_is_reproducible() {
        let cfg = SynthConfig::default();
        let a = generate_synthetic_corpus(&cfg).unwrap();
        let b = generate_synthetic_corpus(&cfg).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.pairs, b.pairs);
        let c = generate_synthetic_corpus(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn corruption_fraction() {
        let cfg = SynthConfig {
            pair_corruption: 0.3,
            n_speakers: 8,
            words_per_speaker_per_type: 4,
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic_corpus(&cfg).unwrap();
        let gold = |seg: &WordSegment| {
            corpus
                .words
                .iter()
                .find(|w| w.segment.utterance_id == seg.utterance_id && w.segment.start_frame == seg.start_frame)
                .unwrap()
                .gold_type
                .clone()
        };
        let mismatched = corpus.pairs.iter().filter(|p| gold(&p.first) != gold(&p.second)).count();
        let frac = mismatched as f64 / corpus.pairs.len() as f64;
        assert!((frac - 0.3).abs() <= 0.02, "{frac}");
        assert!(corpus.pairs.iter().all(|p| p.first.cluster_id == p.second.cluster_id));
    }

    #[test]
    fn held_out_speakers_split() {
        let corpus = generate_synthetic_corpus(&SynthConfig::default()).unwrap();
        assert_eq!(corpus.train_speakers.len(), 4);
        assert_eq!(corpus.eval_speakers, vec!["spk04".to_string(), "spk05".to_string()]);
        for p in &corpus.pairs {
            assert!(corpus.train_speakers.contains(&p.first.speaker_id));
            assert!(corpus.train_speakers.contains(&p.second.speaker_id));
        }
        assert_eq!(corpus.eval_words.len(), 2 * 6 * 3);
        let feats = FeatureSet::new(corpus.features.clone()).unwrap();
        for w in &corpus.words {
            w.segment.validate(&feats).unwrap();
        }
    }

    #[test]
    fn degenerate_configs_rejected() {
        for cfg in [
            SynthConfig { n_types: 1, ..SynthConfig::default() },
            SynthConfig { n_speakers: 0, held_out_speakers: 0, ..SynthConfig::default() },
            SynthConfig { frames_range: (5, 4), ..SynthConfig::default() },
            SynthConfig { held_out_speakers: 6, ..SynthConfig::default() },
            SynthConfig { pair_corruption: 1.5, ..SynthConfig::default() },
        ] {
            assert!(generate_synthetic_corpus(&cfg).is_err());
        }
    }

    #[test]
    fn minimal_pair_labels() {
        assert_eq!(type_label(0), "l0-m0-r0");
        assert_eq!(type_label(1), "l0-m1-r0");
        assert_eq!(type_label(2), "l1-m2-r1");
        assert_eq!(type_label(3), "l1-m3-r1");
    }
}
