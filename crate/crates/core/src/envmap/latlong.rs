use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rayon::prelude::*;

use super::EnvError;
use crate::lightmodel::{Direction, SphericalGaussian};
use crate::radiometry::{read_pfm_file, LinearImage};

/// Direction through the centre of texel (`row`, `col`) of a `width`×`height`
/// lat-long map. Row 0 touches the +z pole; column 0 starts at azimuth 0.
pub fn texel_direction(row: usize, col: usize, width: usize, height: usize) -> Result<Direction, EnvError> {
    if row >= height || col >= width {
        return Err(EnvError::IndexOutOfRange {
            row,
            col,
            width,
            height,
        });
    }
    Ok(texel_dir_unchecked(row, col, width, height))
}

pub(crate) fn texel_dir_unchecked(row: usize, col: usize, width: usize, height: usize) -> Direction {
    let theta = PI * (row as f64 + 0.5) / height as f64;
    let phi = TAU * (col as f64 + 0.5) / width as f64;
    Direction::from_spherical(theta, phi)
}

/// `(2π/W)(π/H)·sin θ` for texels in `row`.
pub fn texel_solid_angle(row: usize, width: usize, height: usize) -> Result<f64, EnvError> {
    if row >= height || width == 0 {
        return Err(EnvError::IndexOutOfRange {
            row,
            col: 0,
            width,
            height,
        });
    }
    Ok(solid_angle_unchecked(row, width, height))
}

pub(crate) fn solid_angle_unchecked(row: usize, width: usize, height: usize) -> f64 {
    let theta = PI * (row as f64 + 0.5) / height as f64;
    (TAU / width as f64) * (PI / height as f64) * theta.sin()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Filter {
    #[default]
    Bilinear,
    Nearest,
}

/// Lat-long HDR radiance map plus the rotation that takes map space to world
/// space.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentMap {
    image: LinearImage,
    rotation: Rotation3<f64>,
    azimuth: f64,
}

impl EnvironmentMap {
    pub fn new(image: LinearImage) -> Result<Self, EnvError> {
        let (w, h) = image.dims();
        if w != 2 * h {
            return Err(EnvError::BadAspect { width: w, height: h });
        }
        if image.data().iter().any(|v| *v < 0.0) {
            return Err(EnvError::NegativeRadiance);
        }
        Ok(Self {
            image,
            rotation: Rotation3::identity(),
            azimuth: 0.0,
        })
    }

    pub fn from_pfm_file(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        Self::new(read_pfm_file(path)?)
    }

    /// Map of height `height` whose texel centres hold `f(direction)`.
    pub fn from_fn(height: usize, f: impl Fn(&Direction) -> [f64; 3] + Sync) -> Self {
        let w = 2 * height;
        let img = LinearImage::from_fn(w, height, |x, y| {
            f(&texel_dir_unchecked(y, x, w, height)).map(|v| v as f32)
        });
        Self::new(img).expect("synthesised map is valid")
    }

    pub fn from_sgs(height: usize, sgs: &[SphericalGaussian]) -> Self {
        Self::from_fn(height, |d| {
            let mut acc = [0.0; 3];
            for sg in sgs {
                let g = sg.lobe(d);
                for c in 0..3 {
                    acc[c] += sg.amplitude[c] * g;
                }
            }
            acc
        })
    }

    pub fn constant(height: usize, rgb: [f64; 3]) -> Self {
        Self::new(LinearImage::filled(2 * height, height, rgb.map(|v| v as f32))).expect("valid")
    }

    pub fn image(&self) -> &LinearImage {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    /// Accumulated azimuthal rotation in radians.
    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    /// Rotates the environment about +z by `delta` radians.
    pub fn rotate(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), delta) * self.rotation;
        out.azimuth += delta;
        out
    }

    /// Applies an arbitrary world-space rotation on top of the current one.
    pub fn rotate_by(&self, m: &Matrix3<f64>) -> Self {
        let mut out = self.clone();
        out.rotation = Rotation3::from_matrix(m) * self.rotation;
        out
    }

    /// World-space direction of a texel centre.
    pub fn world_texel_direction(&self, row: usize, col: usize) -> Direction {
        let d = texel_dir_unchecked(row, col, self.width(), self.height());
        d.rotated(self.rotation.matrix())
    }

    pub fn texel(&self, row: usize, col: usize) -> [f64; 3] {
        self.image.pixel(col, row).map(|v| v as f64)
    }

    /// Radiance arriving from world direction `d`.
    pub fn sample(&self, d: &Direction, filter: Filter) -> [f64; 3] {
        let local = self.rotation.inverse_transform_vector(d.vector());
        let (w, h) = (self.width(), self.height());
        let theta = local.z.clamp(-1.0, 1.0).acos();
        let phi = local.y.atan2(local.x).rem_euclid(TAU);
        let u = phi / TAU * w as f64 - 0.5;
        let v = theta / PI * h as f64 - 0.5;
        match filter {
            Filter::Nearest => {
                let col = (u.round() as i64).rem_euclid(w as i64) as usize;
                let row = (v.round().max(0.0) as usize).min(h - 1);
                self.texel(row, col)
            }
            Filter::Bilinear => {
                let x0 = u.floor();
                let fx = u - x0;
                let c0 = (x0 as i64).rem_euclid(w as i64) as usize;
                let c1 = (c0 + 1) % w;
                let y0 = v.floor();
                let fy = v - y0;
                let r0 = (y0.max(0.0) as usize).min(h - 1);
                let r1 = ((y0 + 1.0).max(0.0) as usize).min(h - 1);
                let (p00, p01, p10, p11) = (self.texel(r0, c0), self.texel(r0, c1), self.texel(r1, c0), self.texel(r1, c1));
                let mut out = [0.0; 3];
                for c in 0..3 {
                    let top = p00[c] * (1.0 - fx) + p01[c] * fx;
                    let bottom = p10[c] * (1.0 - fx) + p11[c] * fx;
                    out[c] = top * (1.0 - fy) + bottom * fy;
                }
                out
            }
        }
    }

    /// ∫ L dΩ by texel quadrature.
    pub fn integrate(&self) -> [f64; 3] {
        let (w, h) = (self.width(), self.height());
        let rows: Vec<[f64; 3]> = (0..h)
            .into_par_iter()
            .map(|row| {
                let omega = solid_angle_unchecked(row, w, h);
                let mut acc = [0.0; 3];
                for px in self.image.row(row).chunks_exact(3) {
                    for c in 0..3 {
                        acc[c] += omega * px[c] as f64;
                    }
                }
                acc
            })
            .collect();
        rows.iter().fold([0.0; 3], |a, r| [a[0] + r[0], a[1] + r[1], a[2] + r[2]])
    }

    /// Unrotated map of height `height` holding this map's world-space
    /// radiance sampled at the new texel centres.
    pub fn resampled(&self, height: usize, filter: Filter) -> Self {
        if height == self.height() && self.rotation == Rotation3::identity() {
            return self.clone();
        }
        Self::from_fn(height, |d| self.sample(d, filter))
    }

    /// Scaled copy (linear combination helper).
    pub fn scaled(&self, k: f32) -> Self {
        let mut out = self.clone();
        out.image = self.image.scaled([k; 3]);
        out
    }
}
