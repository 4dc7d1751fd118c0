//! Binary matrix cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   b"FDSM"
//! version u32 = 1
//! n_rows  u64
//! n_cols  u64
//! nnz     u64
//! indptr  (n_rows + 1) x u64
//! indices nnz x u32
//! values  nnz x f64
//! ```
//!
//! The vocabulary is stored next to it as JSON (`<path>.vocab.json`).

use std::path::{Path, PathBuf};

use super::{SparseMatrix, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FDSM";
const VERSION: u32 = 1;

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".vocab.json");
    PathBuf::from(s)
}

pub fn encode_matrix(m: &SparseMatrix) -> Vec<u8> {
    let (indptr, indices, values) = m.raw_parts();
    let mut out = Vec::with_capacity(28 + indptr.len() * 8 + indices.len() * 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u64).to_le_bytes());
    out.extend_from_slice(&(m.nnz() as u64).to_le_bytes());
    indptr.iter().for_each(|&p| out.extend_from_slice(&(p as u64).to_le_bytes()));
    indices.iter().for_each(|&j| out.extend_from_slice(&j.to_le_bytes()));
    values.iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes()));
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(Error::Serde("truncated matrix cache".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take()?) as usize)
    }
}

pub fn decode_matrix(bytes: &[u8]) -> Result<SparseMatrix> {
    let mut c = Cursor(bytes);
    if &c.take::<4>()? != MAGIC {
        return Err(Error::Serde("not a matrix cache (bad magic)".into()));
    }
    let version = u32::from_le_bytes(c.take()?);
    if version != VERSION {
        return Err(Error::Serde(format!("unsupported matrix cache version {version}")));
    }
    let (n_rows, n_cols, nnz) = (c.u64()?, c.u64()?, c.u64()?);
    let expected = (n_rows + 1) * 8 + nnz * 12;
    if c.0.len() != expected {
        return Err(Error::Serde(format!("matrix cache body is {} bytes, expected {expected}", c.0.len())));
    }
    let indptr = (0..=n_rows).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    let indices = (0..nnz).map(|_| Ok(u32::from_le_bytes(c.take()?))).collect::<Result<Vec<_>>>()?;
    let values = (0..nnz).map(|_| Ok(f64::from_le_bytes(c.take()?))).collect::<Result<Vec<_>>>()?;
    SparseMatrix::from_raw_parts(n_cols, indptr, indices, values)
}

pub fn write_matrix_cache(path: impl AsRef<Path>, m: &SparseMatrix, vocab: &Vocabulary) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))?;
    let side = sidecar(path);
    std::fs::write(&side, vocab.to_json()?).map_err(|e| Error::io(side, e))
}

pub fn read_matrix_cache(path: impl AsRef<Path>) -> Result<(SparseMatrix, Vocabulary)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = decode_matrix(&bytes)?;
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let vocab = Vocabulary::from_json(&text)?;
    if vocab.len() != m.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "cache has {} columns but vocabulary has {} features",
            m.n_cols(),
            vocab.len()
        )));
    }
    Ok((m, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let m = SparseMatrix::from_dense(3, &[vec![0.0, 1.5, 0.0]]).unwrap();
        let b = encode_matrix(&m);
        assert_eq!(&b[..4], b"FDSM");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[24..32].try_into().unwrap()), 1);
        assert_eq!(b.len(), 32 + 16 + 4 + 8);
        assert_eq!(decode_matrix(&b).unwrap(), m);
        assert!(decode_matrix(&b[..b.len() - 1]).is_err());
    }
}
