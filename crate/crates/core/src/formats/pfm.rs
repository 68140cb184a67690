//! Single-channel PFM (`Pf`), little-endian (negative scale), rows stored
//! bottom to top.

use super::FormatError;
use crate::raster::DepthImage;

pub fn write_pfm(img: &DepthImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * (w * h) as usize);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&img.get(x, y).to_le_bytes());
        }
    }
    out
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, FormatError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Pfm("truncated header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| FormatError::Pfm("non-ASCII header".into()))
}

pub fn read_pfm(bytes: &[u8]) -> Result<DepthImage, FormatError> {
    let mut pos = 0;
    if token(bytes, &mut pos)? != "Pf" {
        return Err(FormatError::Pfm("only single-channel 'Pf' files are supported".into()));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| FormatError::Pfm(format!("bad dimension '{s}'")));
    let w = parse(token(bytes, &mut pos)?)?;
    let h = parse(token(bytes, &mut pos)?)?;
    let scale: f64 = token(bytes, &mut pos)?
        .parse()
        .map_err(|_| FormatError::Pfm("bad scale".into()))?;
    if scale >= 0.0 {
        return Err(FormatError::Pfm("big-endian files are not supported".into()));
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;
    let n = (w as usize) * (h as usize);
    let payload = bytes.get(pos..).unwrap_or_default();
    if payload.len() != 4 * n {
        return Err(FormatError::SizeMismatch {
            expected: 4 * n as u64,
            actual: payload.len() as u64,
        });
    }
    let mut img = DepthImage::new(w, h);
    for (i, c) in payload.chunks_exact(4).enumerate() {
        let (x, row) = ((i % w as usize) as u32, (i / w as usize) as u32);
        img.set(x, h - 1 - row, f32::from_le_bytes(c.try_into().expect("4 bytes")));
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_row_order() {
        let data: Vec<f32> = (0..6).map(|i| i as f32 + 0.5).collect();
        let img = DepthImage::from_raw(3, 2, data).unwrap();
        let bytes = write_pfm(&img);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // First stored row is the bottom image row.
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, img.get(0, 1));
        assert_eq!(read_pfm(&bytes).unwrap(), img);
        assert!(matches!(read_pfm(&bytes[..bytes.len() - 2]), Err(FormatError::SizeMismatch { .. })));
        assert!(matches!(read_pfm(b"PF\n1 1\n-1.0\n"), Err(FormatError::Pfm(_))));
    }
}
