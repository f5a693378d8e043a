//! Versioned, checksummed binary container shared by codebook and model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "KNME"
//! version    u32
//! kind       4 bytes  e.g. "CDBK", "MODL"
//! header     u32 length + UTF-8 JSON
//! matrices   u32 count, then per matrix:
//!              u16 name length + UTF-8 name, u64 rows, u64 cols,
//!              rows*cols f64 (row-major)
//! checksum   32 bytes SHA-256 of everything above
//! ```

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"KNME";
pub const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Contents {
    pub header: String,
    pub matrices: Vec<(String, Array2<f64>)>,
}

impl Contents {
    pub fn take(&mut self, name: &str, expected: &'static str) -> Result<Array2<f64>> {
        let pos = self
            .matrices
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Container {
                expected,
                message: format!("missing matrix '{name}'"),
            })?;
        Ok(self.matrices.remove(pos).1)
    }
}

pub fn encode(kind: [u8; 4], header: &str, matrices: &[(&str, ArrayView2<f64>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&kind);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(matrices.len() as u32).to_le_bytes());
    for (name, m) in matrices {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
        for row in m.rows() {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    expected: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Container {
                expected: self.expected,
                message: "unexpected end of data".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        let expected = self.expected;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Container {
            expected,
            message: "invalid UTF-8".into(),
        })
    }
}

/// Validates magic, version, checksum and kind, then splits out the contents.
pub fn decode(bytes: &[u8], kind: [u8; 4], expected: &'static str) -> Result<Contents> {
    if bytes.len() < 8 || bytes[..4] != MAGIC {
        return Err(Error::Container {
            expected,
            message: "bad magic".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    if bytes.len() < 8 + CHECKSUM_LEN {
        return Err(Error::Checksum);
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Checksum);
    }

    let mut cur = Cursor {
        bytes: body,
        pos: 8,
        expected,
    };
    if cur.take(4)? != kind {
        return Err(Error::Container {
            expected,
            message: "wrong payload kind".into(),
        });
    }
    let header_len = cur.u32()? as usize;
    let header = cur.string(header_len)?;
    let count = cur.u32()?;
    let mut matrices = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = cur.string(name_len)?;
        let rows = cur.u64()? as usize;
        let cols = cur.u64()? as usize;
        let len = rows.checked_mul(cols).ok_or_else(|| Error::Container {
            expected,
            message: "matrix size overflow".into(),
        })?;
        let raw = cur.take(len.checked_mul(8).ok_or_else(|| Error::Container {
            expected,
            message: "matrix size overflow".into(),
        })?)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Container {
            expected,
            message: e.to_string(),
        })?;
        matrices.push((name, m));
    }
    if cur.pos != body.len() {
        return Err(Error::Container {
            expected,
            message: "trailing bytes before checksum".into(),
        });
    }
    Ok(Contents { header, matrices })
}
