//! Bit-exact IDX parsing and encoding.
//!
//! Image files: big-endian magic 0x00000803, three big-endian u32 dims
//! (count, rows, cols), then count·rows·cols unsigned bytes row-major.
//! Label files: magic 0x00000801, one count dim, then count unsigned bytes.
//! Gzip-compressed streams are detected by the 0x1f 0x8b prefix and inflated
//! before parsing.

use std::borrow::Cow;
use std::io::Read;

use flate2::read::GzDecoder;

use super::DatasetError;
use crate::scalar::Real;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parses an IDX image stream into one feature vector per image, pixel bytes
/// widened to reals. The payload length must match the header exactly.
pub fn parse_idx_images<T: Real>(bytes: &[u8]) -> Result<Vec<Vec<T>>, DatasetError> {
    let bytes = inflate_if_gzip(bytes)?;
    let bytes = bytes.as_ref();
    expect_magic(bytes, IMAGE_MAGIC)?;
    let count = read_dim(bytes, 4, "count")? as usize;
    let rows = read_dim(bytes, 8, "rows")? as usize;
    let cols = read_dim(bytes, 12, "cols")? as usize;
    let pixels = rows.saturating_mul(cols);
    let needed = 16usize.saturating_add(count.saturating_mul(pixels));
    check_payload(bytes.len(), needed)?;
    Ok(bytes[16..needed]
        .chunks_exact(pixels)
        .map(|image| image.iter().map(|&px| T::from_u8(px).expect("u8 fits any Real")).collect())
        .collect())
}

/// Parses an IDX label stream; each label is the raw byte value.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DatasetError> {
    let bytes = inflate_if_gzip(bytes)?;
    let bytes = bytes.as_ref();
    expect_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let needed = 8usize.saturating_add(count);
    check_payload(bytes.len(), needed)?;
    Ok(bytes[8..needed].to_vec())
}

/// Encodes feature vectors as an IDX image stream. Each vector must have
/// length `rows·cols`; values are rounded and clamped to bytes, so byte-valued
/// inputs round-trip exactly through [`parse_idx_images`].
pub fn encode_idx_images<T: Real>(vectors: &[Vec<T>], rows: u32, cols: u32) -> Vec<u8> {
    let pixels = (rows as usize) * (cols as usize);
    let mut out = Vec::with_capacity(16 + vectors.len() * pixels);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(vectors.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for vector in vectors {
        assert_eq!(vector.len(), pixels, "vector length must equal rows*cols");
        out.extend(vector.iter().map(|&v| to_byte(v)));
    }
    out
}

/// Encodes labels as an IDX label stream.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn to_byte<T: Real>(value: T) -> u8 {
    let v = value.to_f64().unwrap_or(0.0).round();
    if v <= 0.0 {
        0
    } else if v >= 255.0 {
        255
    } else {
        v as u8
    }
}

fn inflate_if_gzip(bytes: &[u8]) -> Result<Cow<'_, [u8]>, DatasetError> {
    if bytes.len() >= 2 && bytes[..2] == GZIP_MAGIC {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut inflated)
            .map_err(DatasetError::Gzip)?;
        Ok(Cow::Owned(inflated))
    } else {
        Ok(Cow::Borrowed(bytes))
    }
}

fn expect_magic(bytes: &[u8], expected: u32) -> Result<(), DatasetError> {
    let found = read_u32_be(bytes, 0)?;
    if found != expected {
        return Err(DatasetError::WrongMagic { expected, found });
    }
    Ok(())
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32, DatasetError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DatasetError::TruncatedStream { needed: end, got: bytes.len() });
    }
    let mut buf = [0u8; 4];
    buf.copy_from_slice(&bytes[offset..end]);
    Ok(u32::from_be_bytes(buf))
}

fn read_dim(bytes: &[u8], offset: usize, name: &'static str) -> Result<u32, DatasetError> {
    let dim = read_u32_be(bytes, offset)?;
    if dim == 0 {
        return Err(DatasetError::ZeroDimension(name));
    }
    Ok(dim)
}

fn check_payload(got: usize, needed: usize) -> Result<(), DatasetError> {
    if got < needed {
        return Err(DatasetError::TruncatedStream { needed, got });
    }
    if got > needed {
        return Err(DatasetError::TrailingBytes(got - needed));
    }
    Ok(())
}
