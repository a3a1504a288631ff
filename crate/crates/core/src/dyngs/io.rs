use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Splat, SplatError};
use crate::radiometry::write_atomic;
use crate::{Error, Result};

/// Per-splat record order; every field is a little-endian f32.
pub const SPLAT_FIELDS: [&str; 14] = [
    "x", "y", "z", "rot_w", "rot_x", "rot_y", "rot_z", "scale_x", "scale_y", "scale_z", "opacity", "r", "g", "b",
];

const STRIDE: usize = SPLAT_FIELDS.len() * 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplatSidecar {
    pub count: usize,
    pub stride_bytes: usize,
    pub endianness: String,
    pub fields: Vec<String>,
}

impl SplatSidecar {
    fn for_count(count: usize) -> Self {
        Self {
            count,
            stride_bytes: STRIDE,
            endianness: "little".into(),
            fields: SPLAT_FIELDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub(crate) fn encode(splats: &[Splat]) -> Vec<u8> {
    let mut out = Vec::with_capacity(splats.len() * STRIDE);
    for s in splats {
        let vals = s.position.iter().chain(&s.rotation).chain(&s.scale).chain([&s.opacity]).chain(&s.color);
        for v in vals {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Records are renormalised after the f32 round trip so the quaternion
/// passes validation again.
pub(crate) fn decode(bytes: &[u8], count: usize) -> Result<Vec<Splat>, SplatError> {
    if bytes.len() != count * STRIDE {
        return Err(SplatError::Format(format!(
            "{} bytes for {count} splats of {STRIDE} bytes",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(STRIDE)
        .map(|rec| {
            let f: Vec<f64> = rec
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")) as f64)
                .collect();
            let n = (f[3] * f[3] + f[4] * f[4] + f[5] * f[5] + f[6] * f[6]).sqrt();
            if !(n > 0.0) {
                return Err(SplatError::Format("zero quaternion".into()));
            }
            Splat::new(
                [f[0], f[1], f[2]],
                [f[3] / n, f[4] / n, f[5] / n, f[6] / n],
                [f[7], f[8], f[9]],
                f[10],
                [f[11], f[12], f[13]],
            )
        })
        .collect()
}

/// Writes the binary records to `path` and the sidecar to `path` + `.json`.
pub fn write_splats(path: impl AsRef<Path>, splats: &[Splat]) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, &encode(splats))?;
    let side = serde_json::to_vec_pretty(&SplatSidecar::for_count(splats.len()))?;
    write_atomic(&sidecar_path(path), &side)?;
    Ok(())
}

pub fn read_splats(path: impl AsRef<Path>) -> Result<Vec<Splat>> {
    let path = path.as_ref();
    let side_path = sidecar_path(path);
    let side_bytes = std::fs::read(&side_path).map_err(|e| Error::io(side_path.display().to_string(), e))?;
    let side: SplatSidecar = serde_json::from_slice(&side_bytes)?;
    if side.stride_bytes != STRIDE || side.endianness != "little" || side.fields != SPLAT_FIELDS {
        return Err(SplatError::Format("sidecar does not describe the 14-float layout".into()).into());
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(decode(&bytes, side.count)?)
}
