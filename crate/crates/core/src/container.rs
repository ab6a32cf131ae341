//! Binary tensor container.
//!
//! A tensor record is the 8-byte magic `RFATNSR\0`, a little-endian `u32`
//! rank, `rank` little-endian `u32` extents, then the `f64` payload in
//! little-endian row-major order.
//!
//! A checkpoint is a sequence of named sections running to end of input;
//! each section is a little-endian `u32` byte length, that many bytes of
//! UTF-8 name (a dotted parameter path), then one tensor record.

use alloc::string::String;
use alloc::vec::Vec;

use crate::tensor::MAX_RANK;
use crate::{Error, Result, Tensor};

pub const MAGIC: &[u8; 8] = b"RFATNSR\0";

pub fn encode_tensor(t: &Tensor, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Decode {
                offset: self.pos,
                reason: alloc::format!(
                    "truncated {what}: need {n} bytes, {} left",
                    self.buf.len() - self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let at = self.pos;
        let magic = self.take(8, "magic")?;
        if magic != MAGIC {
            return Err(Error::Decode {
                offset: at,
                reason: alloc::format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
            });
        }
        let rank_at = self.pos;
        let rank = self.u32("rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Decode {
                offset: rank_at,
                reason: alloc::format!("rank {rank} outside 1..={MAX_RANK}"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32("extent")? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Decode {
                offset: rank_at,
                reason: alloc::format!("invalid extents {shape:?}"),
            })?;
        let bytes = count.checked_mul(8).ok_or_else(|| Error::Decode {
            offset: rank_at,
            reason: "payload size overflows".into(),
        })?;
        let payload = self.take(bytes, "payload")?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        Tensor::new(&shape, data)
    }
}

/// Decodes one tensor record, returning it with the number of bytes used.
pub fn decode_tensor(buf: &[u8]) -> Result<(Tensor, usize)> {
    let mut r = Reader { buf, pos: 0 };
    let t = r.tensor()?;
    Ok((t, r.pos))
}

pub fn encode_sections<'a>(sections: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, t) in sections {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        encode_tensor(t, &mut out);
    }
    out
}

pub fn decode_sections(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf, pos: 0 };
    let mut out = Vec::new();
    while r.pos < buf.len() {
        let len = r.u32("section name length")? as usize;
        let at = r.pos;
        let name = core::str::from_utf8(r.take(len, "section name")?).map_err(|_| Error::Decode {
            offset: at,
            reason: "section name is not UTF-8".into(),
        })?;
        let name = String::from(name);
        let t = r.tensor()?;
        out.push((name, t));
    }
    Ok(out)
}
