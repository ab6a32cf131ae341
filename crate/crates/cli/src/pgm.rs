//! Binary greyscale PGM (`P5`) images.

use rfa_core::Tensor;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each `≤ maxval`.
    pub pixels: Vec<u16>,
}

fn err(offset: usize, reason: impl Into<String>) -> CliError {
    CliError::Format {
        what: "pgm",
        offset,
        reason: reason.into(),
    }
}

impl Pgm {
    /// `round(255·v)` of a `(H, W)` map with values in `[0, 1]`.
    pub fn from_unit(map: &Tensor) -> Result<Pgm> {
        let (height, width) = match *map.shape() {
            [h, w] => (h, w),
            _ => return Err(CliError::Usage("pgm map must be (H, W)".into())),
        };
        let pixels = map.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16).collect();
        Ok(Pgm {
            width,
            height,
            maxval: 255,
            pixels,
        })
    }

    /// `(1, 1, H, W)` with samples scaled by `1/maxval`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.pixels.iter().map(|&p| p as f64 / self.maxval as f64).collect();
        Tensor::new(&[1, 1, self.height, self.width], data).expect("pgm dimensions")
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        for &p in &self.pixels {
            if self.maxval < 256 {
                out.push(p as u8);
            } else {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Pgm> {
        if !buf.starts_with(b"P5") {
            return Err(err(0, "missing P5 signature"));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for f in &mut fields {
            // whitespace and comments
            loop {
                match buf.get(pos) {
                    Some(b'#') => {
                        while buf.get(pos).is_some_and(|&c| c != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(c) if c.is_ascii_whitespace() => pos += 1,
                    Some(_) => break,
                    None => return Err(err(pos, "truncated header")),
                }
            }
            let start = pos;
            while buf.get(pos).is_some_and(|c| c.is_ascii_digit()) {
                pos += 1;
            }
            *f = std::str::from_utf8(&buf[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(start, "expected a decimal header field"))?;
        }
        if !buf.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
            return Err(err(pos, "expected whitespace after maxval"));
        }
        pos += 1;
        let [width, height, maxval] = fields;
        if maxval == 0 || maxval > 65535 {
            return Err(err(pos, format!("maxval {maxval} out of range")));
        }
        let bytes = if maxval < 256 { 1 } else { 2 };
        let need = width * height * bytes;
        let body = buf
            .get(pos..pos + need)
            .ok_or_else(|| err(buf.len(), format!("expected {need} sample bytes")))?;
        let pixels: Vec<u16> = if bytes == 1 {
            body.iter().map(|&b| b as u16).collect()
        } else {
            body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        if let Some(i) = pixels.iter().position(|&p| p as usize > maxval) {
            return Err(err(pos + i * bytes, "sample exceeds maxval"));
        }
        Ok(Pgm {
            width,
            height,
            maxval: maxval as u16,
            pixels,
        })
    }
}
