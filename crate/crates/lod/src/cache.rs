//! Binary cache for corrector sets.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   b"LODCORR\0"
//! version u32
//! key     [u8; 32]      SHA-256 of (coarse level, fine level, k, coefficient bytes)
//! coarse_level u32, fine_level u32, k u64, elements u64
//! per element, per local vertex:
//!     tag u8            0 = absent, 1 = present
//!     nnz u64, then nnz × u64 indices, nnz × f64 values
//! ```

use std::path::{Path, PathBuf};

use lod_core::coeff::CoeffField;
use lod_core::lod::{CorrectorSet, SparseVec};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fs::write_atomic;

pub const MAGIC: &[u8; 8] = b"LODCORR\0";
pub const VERSION: u32 = 1;

pub type CacheKey = [u8; 32];

pub fn cache_key(coarse_level: u32, fine_level: u32, k: usize, field: &CoeffField) -> CacheKey {
    let mut h = Sha256::new();
    h.update(coarse_level.to_le_bytes());
    h.update(fine_level.to_le_bytes());
    h.update((k as u64).to_le_bytes());
    h.update(field.to_bytes());
    h.finalize().into()
}

pub fn cache_path(dir: &Path, key: &CacheKey) -> PathBuf {
    let hex: String = key.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("correctors-{hex}.bin"))
}

pub fn encode(key: &CacheKey, set: &CorrectorSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(key);
    out.extend_from_slice(&set.coarse_level.to_le_bytes());
    out.extend_from_slice(&set.fine_level.to_le_bytes());
    out.extend_from_slice(&(set.k as u64).to_le_bytes());
    out.extend_from_slice(&(set.correctors.len() as u64).to_le_bytes());
    for slots in &set.correctors {
        for slot in slots {
            match slot {
                None => out.push(0),
                Some(w) => {
                    out.push(1);
                    out.extend_from_slice(&(w.nnz() as u64).to_le_bytes());
                    for &i in &w.indices {
                        out.extend_from_slice(&(i as u64).to_le_bytes());
                    }
                    for &v in &w.values {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Decode a cache image; `None` if it is malformed or stored under another key.
pub fn decode(bytes: &[u8], expected: &CacheKey) -> Option<CorrectorSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC || r.u32()? != VERSION || r.take(32)? != expected {
        return None;
    }
    let coarse_level = r.u32()?;
    let fine_level = r.u32()?;
    let k = r.u64()? as usize;
    let n = r.u64()? as usize;
    if n > bytes.len() {
        return None;
    }
    let mut correctors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut slots: [Option<SparseVec>; 3] = [None, None, None];
        for slot in &mut slots {
            match r.u8()? {
                0 => {}
                1 => {
                    let nnz = r.u64()? as usize;
                    if nnz > bytes.len() {
                        return None;
                    }
                    let indices = (0..nnz).map(|_| r.u64().map(|i| i as usize)).collect::<Option<_>>()?;
                    let values = (0..nnz).map(|_| r.f64()).collect::<Option<_>>()?;
                    *slot = Some(SparseVec { indices, values });
                }
                _ => return None,
            }
        }
        correctors.push(slots);
    }
    if r.pos != bytes.len() {
        return None;
    }
    Some(CorrectorSet {
        coarse_level,
        fine_level,
        k,
        correctors,
    })
}

pub fn load(dir: &Path, key: &CacheKey) -> Option<CorrectorSet> {
    let bytes = std::fs::read(cache_path(dir, key)).ok()?;
    decode(&bytes, key)
}

pub fn store(dir: &Path, key: &CacheKey, set: &CorrectorSet) -> Result<()> {
    let path = cache_path(dir, key);
    write_atomic(&path, &encode(key, set)).map_err(|e| match e {
        Error::Io { cause, .. } => Error::io(path, cause),
        other => other,
    })
}
