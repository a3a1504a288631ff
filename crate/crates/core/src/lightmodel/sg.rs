use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Direction, LightError};

/// Cone angle of the smallest area light (a = 0): one degree.
pub const THETA_MIN: f64 = std::f64::consts::PI / 180.0;
/// Cone angle of the largest area light (a = 1): 89 degrees.
pub const THETA_MAX: f64 = 89.0 * std::f64::consts::PI / 180.0;

/// Isotropic lobe `amplitude · exp(λ (v·axis − 1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalGaussian {
    pub axis: Direction,
    #[serde(rename = "lambda")]
    pub sharpness: f64,
    pub amplitude: [f64; 3],
}

impl SphericalGaussian {
    pub fn new(axis: Direction, sharpness: f64, amplitude: [f64; 3]) -> Result<Self, LightError> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(LightError::InvalidLobe(format!("sharpness {sharpness}")));
        }
        if !amplitude.iter().all(|a| a.is_finite() && *a >= 0.0) {
            return Err(LightError::InvalidLobe(format!("amplitude {amplitude:?}")));
        }
        Ok(Self {
            axis,
            sharpness,
            amplitude,
        })
    }

    /// Unit-amplitude lobe value `exp(λ (v·axis − 1))`.
    pub fn lobe(&self, v: &Direction) -> f64 {
        (self.sharpness * (v.dot(&self.axis) - 1.0)).exp()
    }

    /// ∫ exp(λ(v·μ − 1)) dΩ over the sphere.
    pub fn lobe_integral(&self) -> f64 {
        let l = self.sharpness;
        std::f64::consts::TAU / l * (-(-2.0 * l).exp_m1())
    }
}

pub fn sg_eval(sg: &SphericalGaussian, v: &Direction) -> [f64; 3] {
    let g = sg.lobe(v);
    sg.amplitude.map(|a| a * g)
}

fn cone_angle(a: f64) -> f64 {
    a * (THETA_MAX - THETA_MIN) + THETA_MIN
}

/// SG sharpness for an area light of size `a`: with θ = a(θmax − θmin) + θmin,
/// λ = −cosθ / (cos²θ − 1) = cosθ / sin²θ.
pub fn sg_sharpness(a: f64) -> Result<f64, LightError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(LightError::OutOfRange { name: "a", value: a });
    }
    let (s, c) = cone_angle(a).sin_cos();
    Ok(c / (s * s))
}

/// Inverse of [`sg_sharpness`], clamped to [0, 1]. Sharpness outside
/// [λ(1), λ(0)] saturates at the nearest endpoint.
pub fn size_from_sharpness(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    // λ c² + c − λ = 0, positive root.
    let c = 2.0 * lambda / (1.0 + (1.0 + 4.0 * lambda * lambda).sqrt());
    let theta = c.clamp(-1.0, 1.0).acos();
    ((theta - THETA_MIN) / (THETA_MAX - THETA_MIN)).clamp(0.0, 1.0)
}

/// Universal light descriptor: a direction plus an area-size code in [0, 1]
/// (0 = a single OLAT panel, 1 = flat-lit).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSample {
    pub direction: Direction,
    pub size: f64,
}

impl LightSample {
    pub fn new(direction: Direction, size: f64) -> Result<Self, LightError> {
        if !(0.0..=1.0).contains(&size) {
            return Err(LightError::OutOfRange {
                name: "size",
                value: size,
            });
        }
        Ok(Self { direction, size })
    }

    pub fn sharpness(&self) -> f64 {
        sg_sharpness(self.size).expect("validated on construction")
    }

    /// `(1 − a) · direction`; the zero vector encodes flat-lit.
    pub fn scaled_direction(&self) -> Vector3<f64> {
        self.direction.vector() * (1.0 - self.size)
    }
}
