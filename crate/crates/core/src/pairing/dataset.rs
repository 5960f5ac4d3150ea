//! Binary training-item dataset, little-endian:
//!
//! ```text
//! magic "ZRDS1\0" | u8 kind | u32 dim | u32 n_speakers | n_speakers x (u16 len | utf8)
//! | u32 count | count x item
//! ```
//!
//! Items store their frames as `dim` f32 each followed by u32 speaker indices and u32 ids:
//! pairs `x_a x_b | spk_a spk_b cluster`; triplets add `x_neg | spk_neg neg_cluster
//! neg_segment neg_frame`; quadruplets add `x_neg_b | spk_neg_b neg_b_segment`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FramePair, FrameQuadruplet, FrameTriplet};
use crate::error::{Error, Result};
use crate::features::Cursor;

pub const DATASET_MAGIC: &[u8; 6] = b"ZRDS1\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Pairs,
    Triplets,
    Quadruplets,
}

impl std::fmt::Display for ItemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ItemKind::Pairs => "pairs",
            ItemKind::Triplets => "triplets",
            ItemKind::Quadruplets => "quadruplets",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingSet {
    Pairs(Vec<FramePair>),
    Triplets(Vec<FrameTriplet>),
    Quadruplets(Vec<FrameQuadruplet>),
}

impl TrainingSet {
    pub fn kind(&self) -> ItemKind {
        match self {
            TrainingSet::Pairs(_) => ItemKind::Pairs,
            TrainingSet::Triplets(_) => ItemKind::Triplets,
            TrainingSet::Quadruplets(_) => ItemKind::Quadruplets,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TrainingSet::Pairs(v) => v.len(),
            TrainingSet::Triplets(v) => v.len(),
            TrainingSet::Quadruplets(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn first_pair(&self) -> Option<&FramePair> {
        match self {
            TrainingSet::Pairs(v) => v.first(),
            TrainingSet::Triplets(v) => v.first().map(|t| &t.pair),
            TrainingSet::Quadruplets(v) => v.first().map(|q| &q.triplet.pair),
        }
    }

    /// Frame dimension, or `None` when empty.
    pub fn dim(&self) -> Option<usize> {
        self.first_pair().map(|p| p.x_a.len())
    }

    /// All speaker ids mentioned by any item, sorted.
    pub fn speakers(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        let add_pair = |p: &FramePair, set: &mut BTreeSet<String>| {
            set.insert(p.speaker_a.clone());
            set.insert(p.speaker_b.clone());
        };
        match self {
            TrainingSet::Pairs(v) => v.iter().for_each(|p| add_pair(p, &mut set)),
            TrainingSet::Triplets(v) => v.iter().for_each(|t| {
                add_pair(&t.pair, &mut set);
                set.insert(t.neg_speaker.clone());
            }),
            TrainingSet::Quadruplets(v) => v.iter().for_each(|q| {
                add_pair(&q.triplet.pair, &mut set);
                set.insert(q.triplet.neg_speaker.clone());
                set.insert(q.neg_b_speaker.clone());
            }),
        }
        set.into_iter().collect()
    }
}

struct Writer {
    out: Vec<u8>,
    dim: usize,
    speakers: Vec<String>,
}

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::invalid(format!("value {v} exceeds u32")))?;
        self.out.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn frame(&mut self, x: &[f32]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        for v in x {
            self.out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    }

    fn speaker(&mut self, s: &str) -> Result<()> {
        let idx = self.speakers.binary_search_by(|x| x.as_str().cmp(s)).expect("collected speaker");
        self.u32(idx)
    }

    fn pair(&mut self, p: &FramePair) -> Result<()> {
        self.frame(&p.x_a)?;
        self.frame(&p.x_b)?;
        self.speaker(&p.speaker_a)?;
        self.speaker(&p.speaker_b)?;
        self.u32(p.cluster_id as usize)
    }

    fn triplet(&mut self, t: &FrameTriplet) -> Result<()> {
        self.pair(&t.pair)?;
        self.frame(&t.x_neg)?;
        self.speaker(&t.neg_speaker)?;
        self.u32(t.neg_cluster as usize)?;
        self.u32(t.neg_segment)?;
        self.u32(t.neg_frame)
    }
}

pub fn encode_dataset(set: &TrainingSet) -> Result<Vec<u8>> {
    let speakers = set.speakers();
    let mut w = Writer {
        out: DATASET_MAGIC.to_vec(),
        dim: set.dim().unwrap_or(0),
        speakers,
    };
    w.out.push(match set.kind() {
        ItemKind::Pairs => 0,
        ItemKind::Triplets => 1,
        ItemKind::Quadruplets => 2,
    });
    w.u32(w.dim)?;
    w.u32(w.speakers.len())?;
    for s in w.speakers.clone() {
        let len = u16::try_from(s.len()).map_err(|_| Error::invalid(format!("speaker id '{s}' too long")))?;
        w.out.extend_from_slice(&len.to_le_bytes());
        w.out.extend_from_slice(s.as_bytes());
    }
    w.u32(set.len())?;
    match set {
        TrainingSet::Pairs(v) => v.iter().try_for_each(|p| w.pair(p))?,
        TrainingSet::Triplets(v) => v.iter().try_for_each(|t| w.triplet(t))?,
        TrainingSet::Quadruplets(v) => v.iter().try_for_each(|q| {
            w.triplet(&q.triplet)?;
            w.frame(&q.x_neg_b)?;
            w.speaker(&q.neg_b_speaker)?;
            w.u32(q.neg_b_segment)
        })?,
    }
    Ok(w.out)
}

struct Reader<'a> {
    cur: Cursor<'a>,
    dim: usize,
    speakers: Vec<String>,
}

impl Reader<'_> {
    fn frame(&mut self) -> Result<Vec<f32>> {
        let v = self.cur.f32_vec(self.dim)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed {
                what: "dataset",
                detail: "non-finite frame value".into(),
            });
        }
        Ok(v)
    }

    fn speaker(&mut self) -> Result<String> {
        let idx = self.cur.u32()? as usize;
        self.speakers.get(idx).cloned().ok_or_else(|| Error::Malformed {
            what: "dataset",
            detail: format!("speaker index {idx} out of range"),
        })
    }

    fn pair(&mut self) -> Result<FramePair> {
        Ok(FramePair {
            x_a: self.frame()?,
            x_b: self.frame()?,
            speaker_a: self.speaker()?,
            speaker_b: self.speaker()?,
            cluster_id: self.cur.u32()?,
        })
    }

    fn triplet(&mut self) -> Result<FrameTriplet> {
        Ok(FrameTriplet {
            pair: self.pair()?,
            x_neg: self.frame()?,
            neg_speaker: self.speaker()?,
            neg_cluster: self.cur.u32()?,
            neg_segment: self.cur.u32()? as usize,
            neg_frame: self.cur.u32()? as usize,
        })
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<TrainingSet> {
    if bytes.len() < DATASET_MAGIC.len() || &bytes[..DATASET_MAGIC.len()] != DATASET_MAGIC {
        return Err(Error::Malformed {
            what: "dataset",
            detail: "bad magic".into(),
        });
    }
    let mut cur = Cursor::new(bytes, "dataset");
    cur.take(DATASET_MAGIC.len())?;
    let kind = cur.u8()?;
    let dim = cur.u32()? as usize;
    let n_speakers = cur.u32()? as usize;
    let mut speakers = Vec::with_capacity(n_speakers.min(1 << 16));
    for _ in 0..n_speakers {
        let len = cur.u16()? as usize;
        speakers.push(cur.string(len)?);
    }
    let count = cur.u32()? as usize;
    let mut r = Reader { cur, dim, speakers };
    let set = match kind {
        0 => TrainingSet::Pairs((0..count).map(|_| r.pair()).collect::<Result<_>>()?),
        1 => TrainingSet::Triplets((0..count).map(|_| r.triplet()).collect::<Result<_>>()?),
        2 => TrainingSet::Quadruplets(
            (0..count)
                .map(|_| {
                    Ok(FrameQuadruplet {
                        triplet: r.triplet()?,
                        x_neg_b: r.frame()?,
                        neg_b_speaker: r.speaker()?,
                        neg_b_segment: r.cur.u32()? as usize,
                    })
                })
                .collect::<Result<_>>()?,
        ),
        other => {
            return Err(Error::Malformed {
                what: "dataset",
                detail: format!("unknown item kind {other}"),
            })
        }
    };
    r.cur.finish()?;
    Ok(set)
}

pub fn write_dataset(set: &TrainingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(set)?).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<TrainingSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(k: f32, a: &str, b: &str) -> FramePair {
        FramePair {
            x_a: vec![k, 1.0, -2.0],
            x_b: vec![0.5, k, 3.0],
            speaker_a: a.into(),
            speaker_b: b.into(),
            cluster_id: k as u32,
        }
    }

    #[test]
    fn all_kinds_round_trip() {
        let trip = FrameTriplet {
            pair: pair(2.0, "s2", "s1"),
            x_neg: vec![9.0, 8.0, 7.0],
            neg_speaker: "s2".into(),
            neg_cluster: 5,
            neg_segment: 11,
            neg_frame: 3,
        };
        let quad = FrameQuadruplet {
            triplet: trip.clone(),
            x_neg_b: vec![1.5, 2.5, 3.5],
            neg_b_speaker: "s3".into(),
            neg_b_segment: 12,
        };
        for set in [
            TrainingSet::Pairs(vec![pair(1.0, "s1", "s2"), pair(3.0, "s2", "s2")]),
            TrainingSet::Triplets(vec![trip]),
            TrainingSet::Quadruplets(vec![quad]),
            TrainingSet::Pairs(vec![]),
        ] {
            let bytes = encode_dataset(&set).unwrap();
            assert_eq!(decode_dataset(&bytes).unwrap(), set);
            assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn rejects_mixed_dimensions() {
        let mut bad = pair(1.0, "a", "b");
        bad.x_b.push(0.0);
        assert!(encode_dataset(&TrainingSet::Pairs(vec![bad])).is_err());
    }
}
