//! IDX files as used by MNIST: a big-endian `u32` magic (`0x00000803` for
//! `u8` images of rank 3, `0x00000801` for `u8` labels of rank 1), one
//! big-endian `u32` per dimension, then the raw bytes.

use std::path::Path;

use rfa_core::zoo::Dataset;
use rfa_core::Tensor;

use crate::error::{read_file, write_file, CliError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn err(offset: usize, reason: String) -> CliError {
    CliError::Format {
        what: "idx",
        offset,
        reason,
    }
}

fn be_u32(buf: &[u8], offset: usize) -> Result<u32> {
    buf.get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| err(offset, format!("truncated header, file has {} bytes", buf.len())))
}

/// Header dims and payload offset after checking the magic.
fn header(buf: &[u8], magic: u32) -> Result<(Vec<usize>, usize)> {
    let found = be_u32(buf, 0)?;
    if found != magic {
        return Err(err(0, format!("magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|i| be_u32(buf, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * rank;
    let need: usize = dims.iter().product();
    if buf.len() - start < need {
        return Err(err(
            buf.len(),
            format!("truncated payload, expected {need} bytes after offset {start}"),
        ));
    }
    Ok((dims, start))
}

/// `(N, 1, H, W)` scaled to `[0, 1]`.
pub fn parse_images(buf: &[u8]) -> Result<Tensor> {
    let (dims, start) = header(buf, IMAGE_MAGIC)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    let data = buf[start..start + n * h * w].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Tensor::new(&[n, 1, h, w], data)?)
}

pub fn parse_labels(buf: &[u8]) -> Result<Vec<usize>> {
    let (dims, start) = header(buf, LABEL_MAGIC)?;
    Ok(buf[start..start + dims[0]].iter().map(|&b| b as usize).collect())
}

/// Images are quantized with `round(255·v)` after clamping to `[0, 1]`.
pub fn encode_images(images: &Tensor) -> Result<Vec<u8>> {
    let [n, c, h, w] = images.dims4()?;
    if c != 1 {
        return Err(CliError::Usage("idx images must have one channel".into()));
    }
    let mut out = Vec::with_capacity(16 + n * h * w);
    for v in [IMAGE_MAGIC, n as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(images.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

pub fn encode_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let b = u8::try_from(l).map_err(|_| CliError::Usage(format!("label {l} does not fit in a byte")))?;
        out.push(b);
    }
    Ok(out)
}

/// Loads an image/label file pair. `classes` of `None` uses `max label + 1`.
pub fn load(images: &Path, labels: &Path, classes: Option<usize>) -> Result<Dataset> {
    let x = parse_images(&read_file(images)?)?;
    let y = parse_labels(&read_file(labels)?)?;
    if x.shape()[0] != y.len() {
        return Err(CliError::Usage(format!(
            "{} holds {} images but {} holds {} labels",
            images.display(),
            x.shape()[0],
            labels.display(),
            y.len()
        )));
    }
    let k = classes.unwrap_or_else(|| y.iter().max().map_or(1, |m| m + 1));
    Ok(Dataset::new(x, y, k)?)
}

pub fn save(data: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    write_file(images, &encode_images(&data.images)?)?;
    write_file(labels, &encode_labels(&data.labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IMAGE_MAGIC, 2, 2, 3] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend(0u8..12);
        v
    }

    #[test]
    fn parses_images() {
        let t = parse_images(&sample()).unwrap();
        assert_eq!(t.shape(), &[2, 1, 2, 3]);
        assert_eq!(t.data()[11], 11.0 / 255.0);
    }

    #[test]
    fn wrong_magic_names_offset_and_expected() {
        let mut b = sample();
        b[3] = 0x01;
        let e = parse_images(&b).unwrap_err().to_string();
        assert!(e.contains("byte 0") && e.contains("0x00000803"), "{e}");
    }

    #[test]
    fn truncation_is_an_error() {
        let b = sample();
        assert!(parse_images(&b[..b.len() - 1]).is_err());
        assert!(parse_images(&b[..6]).is_err());
        assert!(parse_labels(&encode_labels(&[1, 2, 3]).unwrap()[..9]).is_err());
    }
}
