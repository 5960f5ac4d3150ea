//! Discovered word pairs and the frame-level training items built from them.

mod build;
mod dataset;
mod sampling;
mod synth;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, SpeakerMap};

pub use build::build_frame_pairs;
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, ItemKind, TrainingSet, DATASET_MAGIC};
pub use sampling::{sample_quadruplets, sample_triplets, SamplingSummary};
pub use synth::{generate_synthetic_corpus, SynthConfig, SyntheticCorpus};

/// A word-like speech interval, `start_frame..end_frame` of one utterance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordSegment {
    pub utterance_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub speaker_id: String,
    pub cluster_id: u32,
}

impl WordSegment {
    pub fn num_frames(&self) -> usize {
        self.end_frame - self.start_frame
    }

    /// Checks the interval against the utterance length in `features`.
    pub fn validate(&self, features: &FeatureSet) -> Result<()> {
        let seq = features.require(&self.utterance_id)?;
        if self.start_frame >= self.end_frame || self.end_frame > seq.num_frames() {
            return Err(Error::invalid(format!(
                "segment {}..{} out of bounds for utterance '{}' with {} frames",
                self.start_frame,
                self.end_frame,
                self.utterance_id,
                seq.num_frames()
            )));
        }
        Ok(())
    }
}

/// Two segments predicted to be the same word type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveredPair {
    pub first: WordSegment,
    pub second: WordSegment,
}

impl DiscoveredPair {
    pub fn cluster_id(&self) -> u32 {
        self.first.cluster_id
    }
}

/// Aligned frames `(x_a, x_b)`; the model input is `x_a` and the target `x_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub x_a: Vec<f32>,
    pub x_b: Vec<f32>,
    pub speaker_a: String,
    pub speaker_b: String,
    pub cluster_id: u32,
}

/// A frame pair plus a negative frame from a different cluster of speaker `speaker_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTriplet {
    pub pair: FramePair,
    pub x_neg: Vec<f32>,
    pub neg_speaker: String,
    pub neg_cluster: u32,
    /// Index of the negative word in the segment list used for sampling.
    pub neg_segment: usize,
    /// Frame offset of `x_neg` within that word.
    pub neg_frame: usize,
}

/// A triplet plus `x_neg_b`, the frame of a fourth same-cluster word aligned to `x_neg`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameQuadruplet {
    pub triplet: FrameTriplet,
    pub x_neg_b: Vec<f32>,
    pub neg_b_speaker: String,
    pub neg_b_segment: usize,
}

/// Parses the 7-column pair list and validates every segment against `features`.
///
/// Columns: `cluster_id utt_a start_a end_a utt_b start_b end_b`, tab-separated; lines
/// starting with `#` and blank lines are ignored.
pub fn parse_pair_list(text: &str, file: &str, features: &FeatureSet, speakers: &SpeakerMap) -> Result<Vec<DiscoveredPair>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |detail: String| Error::Parse {
            file: file.to_string(),
            line: n + 1,
            detail,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 tab-separated fields, found {}", fields.len())));
        }
        let number = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| err(format!("invalid {what} '{s}'")))
        };
        let cluster_id: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid cluster id '{}'", fields[0])))?;
        let segment = |utt: &str, start: &str, end: &str| -> Result<WordSegment> {
            let (start_frame, end_frame) = (number(start, "start frame")?, number(end, "end frame")?);
            if end_frame <= start_frame {
                return Err(err(format!("end {end_frame} is not after start {start_frame}")));
            }
            let speaker_id = speakers
                .speaker_of(utt)
                .map_err(|e| err(e.to_string()))?
                .to_string();
            let seg = WordSegment {
                utterance_id: utt.to_string(),
                start_frame,
                end_frame,
                speaker_id,
                cluster_id,
            };
            seg.validate(features).map_err(|e| err(e.to_string()))?;
            Ok(seg)
        };
        let first = segment(fields[1], fields[2], fields[3])?;
        let second = segment(fields[4], fields[5], fields[6])?;
        pairs.push(DiscoveredPair { first, second });
    }
    Ok(pairs)
}

pub fn load_pair_list(path: impl AsRef<Path>, features: &FeatureSet, speakers: &SpeakerMap) -> Result<Vec<DiscoveredPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pair_list(&text, &path.display().to_string(), features, speakers)
}

pub fn pair_list_to_text(pairs: &[DiscoveredPair]) -> String {
    let mut out = String::from("# cluster_id\tutt_a\tstart_a\tend_a\tutt_b\tstart_b\tend_b\n");
    for p in pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.cluster_id(),
            p.first.utterance_id,
            p.first.start_frame,
            p.first.end_frame,
            p.second.utterance_id,
            p.second.start_frame,
            p.second.end_frame
        ));
    }
    out
}

/// The distinct word segments referenced by `pairs`, in order of first appearance.
pub fn unique_segments(pairs: &[DiscoveredPair]) -> Vec<WordSegment> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for seg in pairs.iter().flat_map(|p| [&p.first, &p.second]) {
        if seen.insert(seg) {
            out.push(seg.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSequence;
    use ndarray::Array2;

    fn fixture() -> (FeatureSet, SpeakerMap) {
        let feats = FeatureSet::new(vec![
            FeatureSequence::new("u1", Array2::zeros((50, 3)), 100.0).unwrap(),
            FeatureSequence::new("u2", Array2::zeros((40, 3)), 100.0).unwrap(),
        ])
        .unwrap();
        let mut spk = SpeakerMap::new();
        spk.insert("u1", "s1");
        spk.insert("u2", "s2");
        (feats, spk)
    }

    #[test]
    fn empty_file() {
        let (f, s) = fixture();
        assert!(parse_pair_list("", "p", &f, &s).unwrap().is_empty());
        assert!(parse_pair_list("# only a comment\n\n", "p", &f, &s).unwrap().is_empty());
    }

    #[test]
    fn one_line() {
        let (f, s) = fixture();
        let pairs = parse_pair_list("3\tu1\t0\t10\tu2\t5\t20\n", "p", &f, &s).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].first.cluster_id, pairs[0].second.cluster_id);
        assert_eq!(pairs[0].second.speaker_id, "s2");
        assert_eq!(pairs[0].second.num_frames(), 15);
    }

    #[test]
    fn end_before_start_names_line() {
        let (f, s) = fixture();
        let err = parse_pair_list("# header\n1\tu1\t10\t10\tu2\t0\t5\n", "pairs.txt", &f, &s).unwrap_err();
        assert!(err.to_string().starts_with("pairs.txt:2:"), "{err}");
    }

    #[test]
    fn bounds_and_unknowns() {
        let (f, s) = fixture();
        assert!(parse_pair_list("1\tu1\t0\t51\tu2\t0\t5\n", "p", &f, &s).is_err());
        assert!(parse_pair_list("1\tu9\t0\t5\tu2\t0\t5\n", "p", &f, &s).is_err());
        assert!(parse_pair_list("1\tu1\t0\t5\tu2\t0\n", "p", &f, &s).is_err());
        assert!(parse_pair_list("x\tu1\t0\t5\tu2\t0\t5\n", "p", &f, &s).is_err());
    }

    #[test]
    fn text_round_trip() {
        let (f, s) = fixture();
        let text = "2\tu1\t0\t10\tu2\t5\t20\n7\tu2\t1\t3\tu1\t4\t9\n";
        let pairs = parse_pair_list(text, "p", &f, &s).unwrap();
        let again = parse_pair_list(&pair_list_to_text(&pairs), "p", &f, &s).unwrap();
        assert_eq!(pairs, again);
        assert_eq!(unique_segments(&pairs).len(), 4);
    }
}
