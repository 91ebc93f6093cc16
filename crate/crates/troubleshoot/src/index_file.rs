//! Binary vector-index files.
//!
//! Layout (little-endian): magic `TDXI`, version `u16`, dimension `u32`,
//! entry count `u64`, then per entry a modality byte, a `u32`-length-prefixed
//! UTF-8 id and `dimension` `f32` values.

use std::fs;
use std::path::{Path, PathBuf};

use troubleshoot_core::retrieval::Modality;
use troubleshoot_core::{EmbeddingVector, VectorIndex};

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 4] = b"TDXI";
pub const VERSION: u16 = 1;

pub fn encode(index: &VectorIndex) -> Vec<u8> {
    let d = index.dimension();
    let mut out = Vec::with_capacity(18 + index.len() * (9 + 4 * d));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for e in index.entries() {
        out.push(e.modality.to_byte());
        out.extend_from_slice(&(e.id.len() as u32).to_le_bytes());
        out.extend_from_slice(e.id.as_bytes());
        for v in e.vector.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, message: impl Into<String>) -> AppError {
        AppError::Corrupt {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt(format!("truncated: need {n} more bytes")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<VectorIndex> {
    let mut r = Reader {
        path,
        buf: bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        r.pos = 0;
        return Err(r.corrupt("bad magic, not an index file"));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(AppError::Config(format!(
            "{}: unsupported index version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let d = u32::from_le_bytes(r.array()?) as usize;
    let count = u64::from_le_bytes(r.array()?);
    let mut index = VectorIndex::new(d);
    for _ in 0..count {
        let at = r.pos;
        let modality = Modality::from_byte(r.array::<1>()?[0]).ok_or_else(|| {
            r.pos = at;
            r.corrupt("unknown modality byte")
        })?;
        let len = u32::from_le_bytes(r.array()?) as usize;
        let id = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.corrupt("id is not UTF-8"))?
            .to_string();
        let raw = r.take(4 * d)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let vector = EmbeddingVector::new(values).map_err(|e| r.corrupt(e.to_string()))?;
        index
            .insert(id, modality, vector)
            .map_err(|e| r.corrupt(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt("trailing bytes after last entry"));
    }
    Ok(index)
}

pub fn write(path: &Path, index: &VectorIndex) -> Result<()> {
    crate::io::write_bytes(path, &encode(index))
}

pub fn read(path: &Path) -> Result<VectorIndex> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(path, &bytes)
}

/// File for ranker `i` inside an index directory.
pub fn ranker_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("ranker-{i}.tdxi"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VectorIndex {
        let mut idx = VectorIndex::new(3);
        idx.insert("T1".into(), Modality::Ticket, EmbeddingVector::new(vec![1.0, -2.5, 0.0]).unwrap())
            .unwrap();
        idx.insert("F1".into(), Modality::FaultAnalysis, EmbeddingVector::new(vec![0.5, 0.25, f32::MIN_POSITIVE]).unwrap())
            .unwrap();
        idx
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let idx = sample();
        let bytes = encode(&idx);
        assert_eq!(&bytes[..4], b"TDXI");
        let back = decode(Path::new("mem"), &bytes).unwrap();
        assert_eq!(encode(&back), bytes);
        assert_eq!(back.entries(), idx.entries());
    }

    #[test]
    fn rejects_unknown_version() {
        let mut bytes = encode(&sample());
        bytes[4] = 9;
        let err = decode(Path::new("mem"), &bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported index version 9"), "{err}");
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&sample());
        let err = decode(Path::new("mem"), &bytes[..bytes.len() - 2]).unwrap_err();
        match err {
            AppError::Corrupt { offset, .. } => assert!(offset > 18),
            other => panic!("unexpected {other}"),
        }
    }
}
