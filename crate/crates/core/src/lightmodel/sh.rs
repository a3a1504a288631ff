//! Real spherical harmonics up to degree 3 in Cartesian polynomial form.
//!
//! Ordering is (l, m) lexicographic with m running −l..=l; the basis carries
//! no Condon–Shortley phase, so `Y_1^{-1}, Y_1^0, Y_1^1` are `c·(y, z, x)`.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{Direction, LightError, LightSample};

pub const SH_DEGREE: usize = 3;
pub const SH_COEFFS: usize = (SH_DEGREE + 1) * (SH_DEGREE + 1);
/// Width of the text-embedding slot the direction code is padded into.
pub const DEFAULT_EMBEDDING_LEN: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShEncoding(pub [f64; SH_COEFFS]);

impl ShEncoding {
    pub fn coefficients(&self) -> &[f64; SH_COEFFS] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        SH_DEGREE
    }
}

fn sh_poly(v: &Vector3<f64>) -> [f64; SH_COEFFS] {
    let (x, y, z) = (v.x, v.y, v.z);
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let c0 = 0.5 / PI.sqrt();
    let c1 = (3.0 / (4.0 * PI)).sqrt();
    let c2a = 0.5 * (15.0 / PI).sqrt();
    let c20 = 0.25 * (5.0 / PI).sqrt();
    let c22 = 0.25 * (15.0 / PI).sqrt();
    let c33 = 0.25 * (35.0 / (2.0 * PI)).sqrt();
    let c32a = 0.5 * (105.0 / PI).sqrt();
    let c31 = 0.25 * (21.0 / (2.0 * PI)).sqrt();
    let c30 = 0.25 * (7.0 / PI).sqrt();
    let c32b = 0.25 * (105.0 / PI).sqrt();
    [
        c0,
        c1 * y,
        c1 * z,
        c1 * x,
        c2a * x * y,
        c2a * y * z,
        c20 * (2.0 * z2 - x2 - y2),
        c2a * x * z,
        c22 * (x2 - y2),
        c33 * y * (3.0 * x2 - y2),
        c32a * x * y * z,
        c31 * y * (4.0 * z2 - x2 - y2),
        c30 * z * (2.0 * z2 - 3.0 * x2 - 3.0 * y2),
        c31 * x * (4.0 * z2 - x2 - y2),
        c32b * z * (x2 - y2),
        c33 * x * (x2 - 3.0 * y2),
    ]
}

/// Degree-3 real SH basis evaluated at `d`.
pub fn sh_encode(d: &Direction) -> ShEncoding {
    ShEncoding(sh_poly(d.vector()))
}

/// `0 ⊕ Y(d)`: `total_len − 16` zeros followed by the SH coefficients.
pub fn pad_embedding(enc: &ShEncoding, total_len: usize) -> Result<Vec<f64>, LightError> {
    if total_len < SH_COEFFS {
        return Err(LightError::TooShort(total_len));
    }
    let mut out = vec![0.0; total_len - SH_COEFFS];
    out.extend_from_slice(&enc.0);
    Ok(out)
}

/// How a size-scaled direction `(1 − a)·d` is turned into an SH code.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShInput {
    /// Encode the normalised scaled vector; the zero vector (a = 1) encodes
    /// to all zeros.
    #[default]
    NormalizedScaled,
    /// Evaluate the SH polynomials directly on the unnormalised vector, which
    /// keeps the size code visible in every band above 0.
    RawScaled,
}

/// Conditioning vector for a light sample.
pub fn conditioning_embedding(
    light: &LightSample,
    total_len: usize,
    input: ShInput,
) -> Result<Vec<f64>, LightError> {
    let v = light.scaled_direction();
    let enc = match input {
        ShInput::NormalizedScaled => match Direction::normalize(v) {
            Ok(d) => sh_encode(&d),
            Err(_) => ShEncoding([0.0; SH_COEFFS]),
        },
        ShInput::RawScaled => ShEncoding(sh_poly(&v)),
    };
    pad_embedding(&enc, total_len)
}
