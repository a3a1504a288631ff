use rayon::prelude::*;

use super::{RadiometryError, ScaleFactor3};

/// Row-major HDR raster of linear-radiance RGB triples. Row 0 is the top row.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RadiometryError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(RadiometryError::BadDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(RadiometryError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn black(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut img = Self::black(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3] + Sync) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = vec![0.0f32; width * height * 3];
        data.par_chunks_mut(width * 3).enumerate().for_each(|(y, row)| {
            for (x, px) in row.chunks_exact_mut(3).enumerate() {
                px.copy_from_slice(&f(x, y));
            }
        });
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width * 3..(y + 1) * self.width * 3]
    }

    /// Per-channel multiply. Does not validate `s`; see [`apply_scale`].
    pub fn scaled(&self, s: [f32; 3]) -> Self {
        let mut out = self.clone();
        for px in out.data.chunks_exact_mut(3) {
            px[0] *= s[0];
            px[1] *= s[1];
            px[2] *= s[2];
        }
        out
    }

    /// Box-filter downscale so that the longer side is at most `max_dim`.
    /// Returns a clone when the image already fits.
    pub fn downscaled(&self, max_dim: usize) -> Self {
        let max_dim = max_dim.max(1);
        let long = self.width.max(self.height);
        if long <= max_dim {
            return self.clone();
        }
        let scale = max_dim as f64 / long as f64;
        let w = ((self.width as f64 * scale).round() as usize).max(1);
        let h = ((self.height as f64 * scale).round() as usize).max(1);
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        Self::from_fn(w, h, |x, y| {
            let x0 = (x as f64 * sx).floor() as usize;
            let x1 = (((x + 1) as f64 * sx).ceil() as usize).min(self.width);
            let y0 = (y as f64 * sy).floor() as usize;
            let y1 = (((y + 1) as f64 * sy).ceil() as usize).min(self.height);
            let mut acc = [0f64; 3];
            for yy in y0..y1 {
                let row = self.row(yy);
                for xx in x0..x1 {
                    for c in 0..3 {
                        acc[c] += row[xx * 3 + c] as f64;
                    }
                }
            }
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            [(acc[0] / n) as f32, (acc[1] / n) as f32, (acc[2] / n) as f32]
        })
    }

    /// Relative RMSE of `self` against `reference`: ‖self − ref‖₂ / ‖ref‖₂.
    pub fn relative_rmse(&self, reference: &LinearImage) -> f64 {
        assert_eq!(self.dims(), reference.dims(), "image dimensions differ");
        let (mut num, mut den) = (0f64, 0f64);
        for (a, b) in self.data.iter().zip(&reference.data) {
            let (a, b) = (*a as f64, *b as f64);
            num += (a - b) * (a - b);
            den += b * b;
        }
        if den == 0.0 {
            return num.sqrt();
        }
        (num / den).sqrt()
    }
}

/// Multiplies each channel by its calibration factor.
pub fn apply_scale(img: &LinearImage, s: ScaleFactor3) -> LinearImage {
    img.scaled([s.r as f32, s.g as f32, s.b as f32])
}
