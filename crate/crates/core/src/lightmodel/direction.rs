use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::LightError;

const UNIT_TOL: f64 = 1e-9;

/// Unit direction vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction(Vector3<f64>);

impl Direction {
    pub const Z: Direction = Direction(Vector3::new(0.0, 0.0, 1.0));
    pub const X: Direction = Direction(Vector3::new(1.0, 0.0, 0.0));
    pub const Y: Direction = Direction(Vector3::new(0.0, 1.0, 0.0));

    /// Accepts an already-normalised vector (‖v‖ = 1 within 1e-9).
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, LightError> {
        let v = Vector3::new(x, y, z);
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(LightError::NotUnit([x, y, z]));
        }
        Ok(Self(v))
    }

    /// Normalises any finite non-zero vector.
    pub fn normalize(v: Vector3<f64>) -> Result<Self, LightError> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(LightError::Degenerate);
        }
        Ok(Self(v / n))
    }

    pub fn from_spherical(inclination: f64, azimuth: f64) -> Self {
        let (st, ct) = inclination.sin_cos();
        let (sp, cp) = azimuth.sin_cos();
        Self(Vector3::new(st * cp, st * sp, ct))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.dot(&other.0)
    }

    /// Azimuth in [0, 2π) measured from +x towards +y.
    pub fn azimuth(&self) -> f64 {
        self.0.y.atan2(self.0.x).rem_euclid(std::f64::consts::TAU)
    }

    /// Angle from +z.
    pub fn inclination(&self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).acos()
    }

    pub fn neg(&self) -> Self {
        Self(-self.0)
    }

    /// Applies a rotation; the result is renormalised to absorb rounding.
    pub fn rotated(&self, m: &Matrix3<f64>) -> Self {
        let v = m * self.0;
        Self(v / v.norm())
    }
}

impl TryFrom<[f64; 3]> for Direction {
    type Error = LightError;

    fn try_from(v: [f64; 3]) -> Result<Self, LightError> {
        Direction::new(v[0], v[1], v[2])
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        d.to_array()
    }
}

/// Rotates a world-space light direction into camera space. `rotation` is the
/// world-to-camera rotation and must be orthonormal within 1e-6.
pub fn to_camera_space(d_world: Direction, rotation: &Matrix3<f64>) -> Result<Direction, LightError> {
    let dev = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
    if !dev.is_finite() || dev > 1e-6 {
        return Err(LightError::NonOrthonormal(dev));
    }
    Ok(d_world.rotated(rotation))
}
