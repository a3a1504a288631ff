use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{NoiseError, NoiseField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub levels: usize,
    pub discount: f64,
}

impl Default for PyramidParams {
    fn default() -> Self {
        Self {
            levels: 6,
            discount: 0.8,
        }
    }
}

/// I.i.d. standard normal field.
pub fn gaussian_noise(width: usize, height: usize, channels: usize, seed: u64) -> Result<NoiseField, NoiseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height * channels;
    NoiseField::new(width, height, channels, (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
}

/// Bilinear upsampling of a `sw × sh` single-channel grid to `w × h`,
/// pixel centres aligned, edges clamped.
fn upsample(src: &[f64], sw: usize, sh: usize, w: usize, h: usize, out: &mut [f64], weight: f64) {
    let coord = |i: usize, n: usize, sn: usize| -> (usize, usize, f64) {
        let p = ((i as f64 + 0.5) * sn as f64 / n as f64 - 0.5).clamp(0.0, (sn - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(sn - 1);
        (i0, i1, p - i0 as f64)
    };
    for y in 0..h {
        let (y0, y1, fy) = coord(y, h, sh);
        for x in 0..w {
            let (x0, x1, fx) = coord(x, w, sw);
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out[y * w + x] += weight * (top * (1.0 - fy) + bot * fy);
        }
    }
}

/// Multi-resolution noise: `Σ_ℓ discount^ℓ · up(N_ℓ)` where `N_ℓ` is white
/// noise at `1/2^ℓ` resolution, then scaled to unit empirical variance.
/// Levels whose resolution would drop below one pixel are skipped.
pub fn pyramid_noise(
    width: usize,
    height: usize,
    channels: usize,
    levels: usize,
    discount: f64,
    seed: u64,
) -> Result<NoiseField, NoiseError> {
    if levels == 0 || !(discount > 0.0 && discount <= 1.0) {
        return Err(NoiseError::InvalidParams(format!("levels={levels} discount={discount}")));
    }
    if width == 0 || height == 0 || channels == 0 {
        return Err(NoiseError::InvalidParams(format!("field {width}x{height}x{channels}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = width * height;
    let mut planes = vec![0.0f64; plane * channels];
    for c in 0..channels {
        let out = &mut planes[c * plane..(c + 1) * plane];
        for l in 0..levels {
            if l >= usize::BITS as usize {
                break;
            }
            let (sw, sh) = (width >> l, height >> l);
            if sw == 0 || sh == 0 {
                break;
            }
            let src: Vec<f64> = (0..sw * sh).map(|_| StandardNormal.sample(&mut rng)).collect();
            upsample(&src, sw, sh, width, height, out, discount.powi(l as i32));
        }
    }
    let n = planes.len() as f64;
    let mean = planes.iter().sum::<f64>() / n;
    let var = planes.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    let mut data = vec![0.0; planes.len()];
    for c in 0..channels {
        for i in 0..plane {
            data[i * channels + c] = planes[c * plane + i] * scale;
        }
    }
    NoiseField::new(width, height, channels, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub mean: f64,
    pub variance: f64,
    /// Correlation between horizontally and vertically adjacent values of
    /// the same channel.
    pub lag1_autocorr: f64,
}

pub fn noise_stats(f: &NoiseField) -> NoiseStats {
    let d = f.data();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let variance = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let (w, h, c) = f.shape();
    let mut cov = 0.0;
    let mut pairs = 0usize;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let a = f.get(x, y, ch) - mean;
                if x + 1 < w {
                    cov += a * (f.get(x + 1, y, ch) - mean);
                    pairs += 1;
                }
                if y + 1 < h {
                    cov += a * (f.get(x, y + 1, ch) - mean);
                    pairs += 1;
                }
            }
        }
    }
    let lag1_autocorr = if pairs == 0 || variance == 0.0 {
        0.0
    } else {
        cov / pairs as f64 / variance
    };
    NoiseStats {
        mean,
        variance,
        lag1_autocorr,
    }
}
