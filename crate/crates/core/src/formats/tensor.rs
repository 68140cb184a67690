//! Raw f32 tensor file.
//!
//! Layout: the 8-byte magic `GSETNSR1`, a little-endian u32 header length,
//! that many bytes of JSON `{"channel_names": [..], "dtype": "f32",
//! "shape": [..]}`, then the row-major little-endian payload. For tensors of
//! rank 3 or more the channel axis is `rank − 3` (so `N×C×H×W` and `C×H×W`),
//! and `channel_names` has one entry per channel; lower ranks carry no names.

use serde::{Deserialize, Serialize};

use super::FormatError;

pub const TENSOR_MAGIC: &[u8; 8] = b"GSETNSR1";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub channel_names: Vec<String>,
    pub data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    channel_names: Vec<String>,
    dtype: String,
    shape: Vec<usize>,
}

fn channel_count(shape: &[usize]) -> usize {
    if shape.len() >= 3 {
        shape[shape.len() - 3]
    } else {
        0
    }
}

fn element_count(shape: &[usize]) -> Option<u64> {
    shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
}

pub fn write_tensor(t: &TensorFile) -> Result<Vec<u8>, FormatError> {
    if channel_count(&t.shape) != t.channel_names.len() {
        return Err(FormatError::Schema(format!(
            "shape {:?} has {} channels but {} names were given",
            t.shape,
            channel_count(&t.shape),
            t.channel_names.len()
        )));
    }
    let n = element_count(&t.shape).ok_or_else(|| FormatError::Schema("shape overflows".into()))?;
    if n != t.data.len() as u64 {
        return Err(FormatError::SizeMismatch {
            expected: n * 4,
            actual: t.data.len() as u64 * 4,
        });
    }
    let header = serde_json::to_vec(&Header {
        channel_names: t.channel_names.clone(),
        dtype: "f32".into(),
        shape: t.shape.clone(),
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + 4 * t.data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a tensor file, refusing any payload whose length differs from the
/// one the header declares.
pub fn read_tensor(bytes: &[u8]) -> Result<TensorFile, FormatError> {
    if bytes.len() < 12 || &bytes[..8] != TENSOR_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| FormatError::Schema(format!("header of {hlen} bytes runs past end of file")))?;
    let header: Header = serde_json::from_slice(&bytes[12..header_end])?;
    if header.dtype != "f32" {
        return Err(FormatError::Schema(format!("unsupported dtype '{}'", header.dtype)));
    }
    if channel_count(&header.shape) != header.channel_names.len() {
        return Err(FormatError::Schema(format!(
            "shape {:?} does not match {} channel names",
            header.shape,
            header.channel_names.len()
        )));
    }
    let expected = element_count(&header.shape)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::Schema("shape overflows".into()))?;
    let payload = &bytes[header_end..];
    if payload.len() as u64 != expected {
        return Err(FormatError::SizeMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(TensorFile {
        shape: header.shape,
        channel_names: header.channel_names,
        data,
    })
}
