use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FeatureSequence, SpeakerMap};
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Which frames share one set of normalization statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmvnMode {
    #[default]
    PerSpeaker,
    PerUtterance,
}

/// Cepstral mean and variance normalization.
///
/// Statistics are pooled over all frames of each group (speaker by default), accumulated in
/// double precision. Dimensions with variance below [`VARIANCE_FLOOR`] map to zero.
pub fn apply_cmvn(
    sequences: &[FeatureSequence],
    speakers: &SpeakerMap,
    mode: CmvnMode,
) -> Result<Vec<FeatureSequence>> {
    let Some(dim) = sequences.first().map(FeatureSequence::dim) else {
        return Ok(Vec::new());
    };
    let mut groups: Vec<&str> = Vec::with_capacity(sequences.len());
    for seq in sequences {
        if seq.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: seq.dim(),
            });
        }
        let speaker = speakers.speaker_of(&seq.utterance_id)?;
        groups.push(match mode {
            CmvnMode::PerSpeaker => speaker,
            CmvnMode::PerUtterance => &seq.utterance_id,
        });
    }

    // (count, sum, sum of squared deviations) via two passes for accuracy
    let mut means: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for (seq, &g) in sequences.iter().zip(&groups) {
        let entry = means.entry(g).or_insert_with(|| (0, vec![0.0; dim]));
        entry.0 += seq.num_frames();
        for row in seq.frames.rows() {
            for (acc, &v) in entry.1.iter_mut().zip(row) {
                *acc += f64::from(v);
            }
        }
    }
    for (count, sum) in means.values_mut() {
        for s in sum.iter_mut() {
            *s /= *count as f64;
        }
    }
    let mut variances: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (seq, &g) in sequences.iter().zip(&groups) {
        let mean = &means[g].1;
        let var = variances.entry(g).or_insert_with(|| vec![0.0; dim]);
        for row in seq.frames.rows() {
            for ((acc, &v), m) in var.iter_mut().zip(row).zip(mean) {
                let d = f64::from(v) - m;
                *acc += d * d;
            }
        }
    }
    let scales: BTreeMap<&str, Vec<f64>> = variances
        .into_iter()
        .map(|(g, var)| {
            let count = means[g].0 as f64;
            let inv = var
                .into_iter()
                .map(|v| {
                    let v = v / count;
                    if v < VARIANCE_FLOOR {
                        0.0
                    } else {
                        1.0 / v.sqrt()
                    }
                })
                .collect();
            (g, inv)
        })
        .collect();

    sequences
        .iter()
        .zip(&groups)
        .map(|(seq, &g)| {
            let mean = &means[g].1;
            let inv_std = &scales[g];
            let mut frames = seq.frames.clone();
            for mut row in frames.rows_mut() {
                for ((v, m), s) in row.iter_mut().zip(mean).zip(inv_std) {
                    *v = ((f64::from(*v) - m) * s) as f32;
                }
            }
            FeatureSequence::new(seq.utterance_id.clone(), frames, seq.frame_rate_hz)
        })
        .collect()
}
