//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zrfl_core::{dtw_distance, AbxItem, FeatureSequence, FeatureSet, LabeledWord, Metric, WordSegment};

pub fn random_seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Array2<f32> {
    Array2::from_shape_fn((len, dim), |_| rng.random_range(-1.0f32..1.0))
}

pub fn local_costs(a: &Array2<f32>, b: &Array2<f32>, metric: Metric) -> Vec<Vec<f64>> {
    let rows = |x: &Array2<f32>| -> Vec<Vec<f64>> {
        x.rows().into_iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
    };
    let (ra, rb) = (rows(a), rows(b));
    ra.iter().map(|u| rb.iter().map(|v| metric.distance(u, v)).collect()).collect()
}

/// Minimum cost over every monotone path, accumulated from the start.
pub fn dtw_brute_force(d: &[Vec<f64>]) -> f64 {
    fn walk(d: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + d[i][j];
        let (ta, tb) = (d.len(), d[0].len());
        if i + 1 == ta && j + 1 == tb {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < ta && j + 1 < tb {
            walk(d, i + 1, j + 1, acc, best);
        }
        if i + 1 < ta {
            walk(d, i + 1, j, acc, best);
        }
        if j + 1 < tb {
            walk(d, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(d, 0, 0, 0.0, &mut best);
    best
}

/// Area under the stepwise PR curve, one point per distinct threshold.
pub fn ap_oracle(distances: &[f64], positive: &[bool]) -> f64 {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let mut thresholds = distances.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let retrieved = distances.iter().filter(|&&d| d <= t).count() as f64;
        let hits = distances.iter().zip(positive).filter(|(&d, &p)| p && d <= t).count() as f64;
        let recall = hits / n_pos;
        ap += hits / retrieved * (recall - prev_recall);
        prev_recall = recall;
    }
    ap
}

pub struct Toy {
    pub features: FeatureSet,
    pub segments: Vec<WordSegment>,
    pub labels: Vec<String>,
}

const LABELS: [&str; 4] = ["a-x-b", "a-y-b", "a-z-b", "c-x-d"];

/// One word per utterance. With `palette`, frames come from a few fixed vectors so that
/// distances tie.
pub fn toy(seed: u64, n_words: usize, n_speakers: usize, palette: bool) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors: Vec<[f32; 3]> = (0..3)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mut seqs = Vec::new();
    let mut segments = Vec::new();
    let mut labels = Vec::new();
    for w in 0..n_words {
        let len = rng.random_range(2..=5);
        let frames = Array2::from_shape_fn((len, 3), |(t, d)| {
            if palette {
                colors[(w + t) % 3][d]
            } else {
                rng.random_range(-1.0f32..1.0)
            }
        });
        let utt = format!("u{w}");
        seqs.push(FeatureSequence::new(utt.clone(), frames, 100.0).unwrap());
        segments.push(WordSegment {
            utterance_id: utt,
            start_frame: 0,
            end_frame: len,
            speaker_id: format!("s{}", rng.random_range(0..n_speakers)),
            cluster_id: 0,
        });
        labels.push(LABELS[rng.random_range(0..LABELS.len())].to_string());
    }
    Toy {
        features: FeatureSet::new(seqs).unwrap(),
        segments,
        labels,
    }
}

impl Toy {
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = &self.features.get(&self.segments[i].utterance_id).unwrap().frames;
        let b = &self.features.get(&self.segments[j].utterance_id).unwrap().frames;
        dtw_distance(a.view(), b.view(), Metric::Cosine).unwrap()
    }

    pub fn words(&self) -> Vec<LabeledWord> {
        self.segments
            .iter()
            .zip(&self.labels)
            .map(|(s, l)| LabeledWord {
                segment: s.clone(),
                gold_type: l.clone(),
            })
            .collect()
    }

    pub fn abx_items(&self) -> Vec<AbxItem> {
        self.segments
            .iter()
            .zip(&self.labels)
            .map(|(s, l)| AbxItem {
                segment: s.clone(),
                triphone_label: l.clone(),
                speaker_id: s.speaker_id.clone(),
            })
            .collect()
    }

    /// All word-pair distances with same-label flags, pairs in `(i, j > i)` order.
    pub fn pair_distances(&self) -> (Vec<f64>, Vec<bool>) {
        let n = self.segments.len();
        let mut d = Vec::new();
        let mut pos = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                d.push(self.dist(i, j));
                pos.push(self.labels[i] == self.labels[j]);
            }
        }
        (d, pos)
    }

    /// ABX error by enumerating every `(A, B, X)` triple; `None` without valid cells.
    pub fn abx_oracle(&self) -> Option<f64> {
        let phones = |l: &str| l.split('-').map(str::to_string).collect::<Vec<_>>();
        let mut cells: BTreeMap<(String, String, String, String), (f64, usize)> = BTreeMap::new();
        let n = self.segments.len();
        for a in 0..n {
            for b in 0..n {
                let (pa, pb) = (phones(&self.labels[a]), phones(&self.labels[b]));
                let minimal = pa[0] == pb[0] && pa[2] == pb[2] && pa[1] != pb[1];
                if !minimal || self.segments[a].speaker_id != self.segments[b].speaker_id {
                    continue;
                }
                for x in 0..n {
                    if self.labels[x] != self.labels[a] || self.segments[x].speaker_id == self.segments[a].speaker_id {
                        continue;
                    }
                    let (dax, dbx) = (self.dist(a, x), self.dist(b, x));
                    let score = if dax < dbx {
                        1.0
                    } else if dax == dbx {
                        0.5
                    } else {
                        0.0
                    };
                    let key = (
                        self.labels[a].clone(),
                        self.labels[b].clone(),
                        self.segments[a].speaker_id.clone(),
                        self.segments[x].speaker_id.clone(),
                    );
                    let cell = cells.entry(key).or_insert((0.0, 0));
                    cell.0 += score;
                    cell.1 += 1;
                }
            }
        }
        if cells.is_empty() {
            return None;
        }
        Some(1.0 - cells.values().map(|(s, c)| s / *c as f64).sum::<f64>() / cells.len() as f64)
    }
}
