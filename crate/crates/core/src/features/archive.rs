//! Binary feature archive, little-endian:
//!
//! ```text
//! magic "ZRFA1\0" | u32 count | count x (u16 id_len | id | u32 T | u32 D | f32 rate | T*D f32)
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::FeatureSequence;
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 6] = b"ZRFA1\0";

pub fn encode_archive(sequences: &[FeatureSequence]) -> Result<Vec<u8>> {
    let payload: usize = sequences.iter().map(|s| 16 + s.utterance_id.len() + 4 * s.frames.len()).sum();
    let mut out = Vec::with_capacity(10 + payload);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&u32_len(sequences.len(), "record count")?.to_le_bytes());
    for seq in sequences {
        let id = seq.utterance_id.as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::invalid(format!("utterance id '{}' too long", seq.utterance_id)))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&u32_len(seq.num_frames(), "frame count")?.to_le_bytes());
        out.extend_from_slice(&u32_len(seq.dim(), "dimension")?.to_le_bytes());
        out.extend_from_slice(&seq.frame_rate_hz.to_le_bytes());
        for v in seq.frames.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("{what} {n} exceeds u32")))
}

pub fn write_archive(sequences: &[FeatureSequence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_archive(sequences)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<Vec<FeatureSequence>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_archive(&bytes)
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Cursor { bytes, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated(self.what))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(Error::Truncated(self.what))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn string(&mut self, len: usize) -> Result<String> {
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Malformed {
            what: self.what,
            detail: "identifier is not UTF-8".into(),
        })
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Malformed {
                what: self.what,
                detail: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub fn decode_archive(bytes: &[u8]) -> Result<Vec<FeatureSequence>> {
    if bytes.len() < ARCHIVE_MAGIC.len() || &bytes[..ARCHIVE_MAGIC.len()] != ARCHIVE_MAGIC {
        return Err(Error::NotAnArchive);
    }
    let mut cur = Cursor::new(bytes, "feature archive");
    cur.take(ARCHIVE_MAGIC.len())?;
    let count = cur.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id_len = cur.u16()? as usize;
        let id = cur.string(id_len)?;
        let t = cur.u32()? as usize;
        let d = cur.u32()? as usize;
        let rate = cur.f32()?;
        let n = t.checked_mul(d).ok_or_else(|| Error::Malformed {
            what: "feature archive",
            detail: format!("record '{id}' shape {t}x{d} overflows"),
        })?;
        let data = cur.f32_vec(n)?;
        let frames = Array2::from_shape_vec((t, d), data).map_err(|e| Error::Malformed {
            what: "feature archive",
            detail: e.to_string(),
        })?;
        out.push(FeatureSequence::new(id, frames, rate).map_err(|e| Error::Malformed {
            what: "feature archive",
            detail: e.to_string(),
        })?);
    }
    cur.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(id: &str, t: usize, d: usize, base: f32) -> FeatureSequence {
        FeatureSequence::new(id, Array2::from_shape_fn((t, d), |(i, j)| base + i as f32 * 0.1 - j as f32), 100.0).unwrap()
    }

    #[test]
    fn empty_archive_round_trips() {
        let bytes = encode_archive(&[]).unwrap();
        assert_eq!(bytes.len(), 10);
        assert!(decode_archive(&bytes).unwrap().is_empty());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_archive(&[seq("a", 2, 2, 0.0)]).unwrap();
        bytes[0] = b'X';
        assert_eq!(decode_archive(&bytes).unwrap_err().to_string(), "not a feature archive");
    }

    #[test]
    fn truncated_and_trailing() {
        let bytes = encode_archive(&[seq("a", 3, 2, 1.0)]).unwrap();
        assert!(matches!(decode_archive(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_archive(&extra), Err(Error::Malformed { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.zrfa");
        let seqs = vec![seq("utt_1", 5, 3, -2.0), seq("ütt2", 1, 3, 7.0)];
        write_archive(&seqs, &path).unwrap();
        assert_eq!(read_archive(&path).unwrap(), seqs);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            records in prop::collection::vec(
                ("[a-z0-9_]{1,12}", 1usize..6, 1usize..5, prop::collection::vec(-1e6f32..1e6, 30)),
                0..5,
            )
        ) {
            let seqs: Vec<_> = records
                .iter()
                .enumerate()
                .map(|(i, (id, t, d, vals))| {
                    let frames = Array2::from_shape_fn((*t, *d), |(a, b)| vals[(a * d + b) % vals.len()]);
                    FeatureSequence::new(format!("{id}{i}"), frames, 100.0).unwrap()
                })
                .collect();
            let back = decode_archive(&encode_archive(&seqs).unwrap()).unwrap();
            prop_assert_eq!(back.len(), seqs.len());
            for (a, b) in seqs.iter().zip(&back) {
                prop_assert_eq!(&a.utterance_id, &b.utterance_id);
                prop_assert!(a.frames.iter().zip(b.frames.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
