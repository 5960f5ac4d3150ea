//! Acoustic front end: MFCCs, CMVN, deltas and the on-disk feature archive.

mod archive;
mod cmvn;
mod deltas;
mod mfcc;
mod wav;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use archive::{decode_archive, encode_archive, read_archive, write_archive, ARCHIVE_MAGIC};
pub(crate) use archive::Cursor;
pub use cmvn::{apply_cmvn, CmvnMode, VARIANCE_FLOOR};
pub use deltas::{add_deltas, DELTA_WINDOW};
pub use mfcc::{compute_mfcc, log_mel_energies, MelFilterbank, MfccConfig};
pub use wav::read_wav_mono;

/// Frames per second of every sequence produced by the front end (10 ms hop).
pub const FRAME_RATE_HZ: f32 = 100.0;

/// A `T x D` matrix of acoustic frames for one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub utterance_id: String,
    pub frames: Array2<f32>,
    pub frame_rate_hz: f32,
}

impl FeatureSequence {
    pub fn new(utterance_id: impl Into<String>, frames: Array2<f32>, frame_rate_hz: f32) -> Result<Self> {
        let utterance_id = utterance_id.into();
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(Error::invalid(format!(
                "utterance '{utterance_id}' has an empty feature matrix"
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "utterance '{utterance_id}' contains non-finite features"
            )));
        }
        Ok(FeatureSequence {
            utterance_id,
            frames: frames.as_standard_layout().into_owned(),
            frame_rate_hz,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Frames `start..end` (end exclusive).
    pub fn segment(&self, start: usize, end: usize) -> ArrayView2<'_, f32> {
        self.frames.slice(s![start..end, ..])
    }
}

/// An ordered collection of feature sequences with lookup by utterance id.
#[derive(Clone, Debug, Default)]
pub struct FeatureSet {
    sequences: Vec<FeatureSequence>,
    index: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn new(sequences: Vec<FeatureSequence>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sequences.len());
        for (i, seq) in sequences.iter().enumerate() {
            if index.insert(seq.utterance_id.clone(), i).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate utterance id '{}'",
                    seq.utterance_id
                )));
            }
        }
        Ok(FeatureSet { sequences, index })
    }

    pub fn get(&self, utterance_id: &str) -> Option<&FeatureSequence> {
        self.index.get(utterance_id).map(|&i| &self.sequences[i])
    }

    pub fn require(&self, utterance_id: &str) -> Result<&FeatureSequence> {
        self.get(utterance_id)
            .ok_or_else(|| Error::UnknownUtterance(utterance_id.to_string()))
    }

    pub fn sequences(&self) -> &[FeatureSequence] {
        &self.sequences
    }

    pub fn into_sequences(self) -> Vec<FeatureSequence> {
        self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Common frame dimension, or `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.sequences.first().map(FeatureSequence::dim)
    }
}

/// Utterance id to speaker id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerMap {
    entries: BTreeMap<String, String>,
}

impl SpeakerMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, utterance_id: impl Into<String>, speaker_id: impl Into<String>) {
        self.entries.insert(utterance_id.into(), speaker_id.into());
    }

    pub fn get(&self, utterance_id: &str) -> Option<&str> {
        self.entries.get(utterance_id).map(String::as_str)
    }

    pub fn speaker_of(&self, utterance_id: &str) -> Result<&str> {
        self.get(utterance_id)
            .ok_or_else(|| Error::MissingSpeaker(utterance_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(u, s)| (u.as_str(), s.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `utterance_id<TAB>speaker_id` lines. Blank lines are skipped.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut map = SpeakerMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(utt), Some(spk), None) if !utt.is_empty() && !spk.is_empty() => {
                    map.insert(utt, spk)
                }
                _ => {
                    return Err(Error::Parse {
                        file: file.to_string(),
                        line: n + 1,
                        detail: "expected `utterance_id<TAB>speaker_id`".into(),
                    })
                }
            }
        }
        Ok(map)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(u, s)| format!("{u}\t{s}\n"))
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
