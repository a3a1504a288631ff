//! Portable FloatMap, colour ("PF") variant. Scanlines are stored bottom to
//! top; a negative scale marks little-endian samples.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LinearImage, RadiometryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

pub fn write_pfm(img: &LinearImage, endian: Endian) -> Vec<u8> {
    let (w, h) = img.dims();
    let scale = match endian {
        Endian::Little => "-1.0",
        Endian::Big => "1.0",
    };
    let mut out = format!("PF\n{w} {h}\n{scale}\n").into_bytes();
    out.reserve(w * h * 12);
    for y in (0..h).rev() {
        for v in img.row(y) {
            let bytes = match endian {
                Endian::Little => v.to_le_bytes(),
                Endian::Big => v.to_be_bytes(),
            };
            out.extend_from_slice(&bytes);
        }
    }
    out
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, RadiometryError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(RadiometryError::MalformedHeader("unexpected end of header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| RadiometryError::MalformedHeader("non-ASCII header".into()))
}

pub fn read_pfm(bytes: &[u8]) -> Result<LinearImage, RadiometryError> {
    let mut pos = 0;
    let magic = header_token(bytes, &mut pos)?;
    match magic {
        "PF" => {}
        "Pf" => return Err(RadiometryError::UnsupportedChannelCount(1)),
        other => {
            return Err(RadiometryError::MalformedHeader(format!(
                "bad magic {other:?}"
            )))
        }
    }
    let parse_dim = |tok: &str| -> Result<usize, RadiometryError> {
        tok.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| RadiometryError::MalformedHeader(format!("bad dimension {tok:?}")))
    };
    let w = parse_dim(header_token(bytes, &mut pos)?)?;
    let h = parse_dim(header_token(bytes, &mut pos)?)?;
    let scale_tok = header_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| RadiometryError::MalformedHeader(format!("bad scale {scale_tok:?}")))?;
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(RadiometryError::MalformedHeader("missing header terminator".into()));
    }
    pos += 1;
    let endian = if scale < 0.0 { Endian::Little } else { Endian::Big };

    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(12))
        .ok_or_else(|| RadiometryError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(RadiometryError::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    let mut data = vec![0f32; w * h * 3];
    for (file_row, chunk) in payload[..expected].chunks_exact(w * 12).enumerate() {
        let y = h - 1 - file_row;
        let dst = &mut data[y * w * 3..(y + 1) * w * 3];
        for (d, b) in dst.iter_mut().zip(chunk.chunks_exact(4)) {
            let b = [b[0], b[1], b[2], b[3]];
            *d = match endian {
                Endian::Little => f32::from_le_bytes(b),
                Endian::Big => f32::from_be_bytes(b),
            };
        }
    }
    LinearImage::new(w, h, data)
}

pub fn read_pfm_file(path: impl AsRef<Path>) -> Result<LinearImage, RadiometryError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| RadiometryError::io(path.display().to_string(), e))?;
    read_pfm(&bytes)
}

/// Writes little-endian PFM via a temp file in the target directory, then
/// renames it into place.
pub fn write_pfm_file(img: &LinearImage, path: impl AsRef<Path>) -> Result<(), RadiometryError> {
    write_atomic(path.as_ref(), &write_pfm(img, Endian::Little))
}

/// Writes `bytes` to a temp file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RadiometryError> {
    let ctx = || path.display().to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| RadiometryError::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| RadiometryError::io(ctx(), e))?;
    tmp.persist(path)
        .map_err(|e| RadiometryError::io(ctx(), e.error))?;
    Ok(())
}
