use nalgebra::{Matrix2, Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::SplatError;

/// Scales pushed to or below zero by an offset are clamped here.
pub const MIN_SCALE: f64 = 1e-6;

const QUAT_TOL: f64 = 1e-9;

/// One 3D Gaussian. `rotation` is a unit quaternion stored `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splat {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
    pub scale: [f64; 3],
    pub opacity: f64,
    pub color: [f64; 3],
}

impl Splat {
    pub fn new(
        position: [f64; 3],
        rotation: [f64; 4],
        scale: [f64; 3],
        opacity: f64,
        color: [f64; 3],
    ) -> Result<Self, SplatError> {
        let s = Self {
            position,
            rotation,
            scale,
            opacity,
            color,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SplatError> {
        let all = self.position.iter().chain(&self.rotation).chain(&self.scale).chain(&self.color);
        if !all.chain([&self.opacity]).all(|v| v.is_finite()) {
            return Err(SplatError::InvalidSplat("non-finite field".into()));
        }
        let n = self.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > QUAT_TOL {
            return Err(SplatError::InvalidSplat(format!("quaternion norm {n}")));
        }
        if self.scale.iter().any(|s| *s <= 0.0) {
            return Err(SplatError::InvalidSplat(format!("scale {:?}", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(SplatError::InvalidSplat(format!("opacity {}", self.opacity)));
        }
        Ok(())
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        build_covariance(&self.quaternion(), &Vector3::from(self.scale))
    }
}

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(s)`.
pub fn build_covariance(r: &UnitQuaternion<f64>, s: &Vector3<f64>) -> Matrix3<f64> {
    let m = r.to_rotation_matrix().into_inner() * Matrix3::from_diagonal(s);
    let sigma = m * m.transpose();
    // Exact symmetry regardless of rounding order.
    (sigma + sigma.transpose()) * 0.5
}

/// `Σ' = J W Σ Wᵀ Jᵀ`.
pub fn project_covariance(sigma: &Matrix3<f64>, w: &Matrix3<f64>, j: &Matrix2x3<f64>) -> Matrix2<f64> {
    let jw = j * w;
    let p = jw * sigma * jw.transpose();
    (p + p.transpose()) * 0.5
}

/// Per-splat deformation at one time. `dr` is a rotation increment
/// `[w, x, y, z]`; the identity increment is `[1, 0, 0, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationOffset {
    pub dx: [f64; 3],
    pub dr: [f64; 4],
    pub ds: [f64; 3],
}

impl Default for DeformationOffset {
    fn default() -> Self {
        Self {
            dx: [0.0; 3],
            dr: [1.0, 0.0, 0.0, 0.0],
            ds: [0.0; 3],
        }
    }
}

impl DeformationOffset {
    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.dx.iter().chain(&self.dr).chain(&self.ds).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitReport {
    pub splats: Vec<Splat>,
    /// Indices of splats with at least one scale clamped to [`MIN_SCALE`].
    pub clamped: Vec<usize>,
}

/// Applies keyframe offsets to the pretrained splats: `x + δx`,
/// `normalize(r ∘ δr)`, `s + δs` clamped positive.
pub fn init_segment(splats: &[Splat], offsets: &[DeformationOffset]) -> Result<InitReport, SplatError> {
    if splats.len() != offsets.len() {
        return Err(SplatError::Misaligned {
            what: "offsets",
            expected: splats.len(),
            got: offsets.len(),
        });
    }
    let mut out = Vec::with_capacity(splats.len());
    let mut clamped = Vec::new();
    for (i, (s, o)) in splats.iter().zip(offsets).enumerate() {
        if !o.components().all(f64::is_finite) {
            return Err(SplatError::InvalidSplat(format!("offset {i} is not finite")));
        }
        let [w, x, y, z] = o.dr;
        let dr = Quaternion::new(w, x, y, z);
        let q = s.quaternion().into_inner() * dr;
        let norm = q.norm();
        if norm == 0.0 {
            return Err(SplatError::InvalidSplat(format!("offset {i} has a zero rotation increment")));
        }
        let q = q / norm;
        let mut scale = [0.0; 3];
        let mut hit = false;
        for c in 0..3 {
            scale[c] = s.scale[c] + o.ds[c];
            if scale[c] <= MIN_SCALE {
                scale[c] = MIN_SCALE;
                hit = true;
            }
        }
        if hit {
            clamped.push(i);
        }
        out.push(Splat {
            position: [s.position[0] + o.dx[0], s.position[1] + o.dx[1], s.position[2] + o.dx[2]],
            rotation: [q.w, q.i, q.j, q.k],
            scale,
            ..*s
        });
    }
    Ok(InitReport { splats: out, clamped })
}

/// `‖δ'_{k0} − δ_{k0}‖₂ + ‖δ'_{k1} − δ_{k1}‖₂`, each norm taken over every
/// splat's `(δx, δr, δs)` concatenated into one vector.
pub fn l_reg(
    learned: (&[DeformationOffset], &[DeformationOffset]),
    initial: (&[DeformationOffset], &[DeformationOffset]),
) -> Result<f64, SplatError> {
    let norm = |a: &[DeformationOffset], b: &[DeformationOffset]| -> Result<f64, SplatError> {
        if a.len() != b.len() {
            return Err(SplatError::Misaligned {
                what: "keyframe offsets",
                expected: b.len(),
                got: a.len(),
            });
        }
        Ok(a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.components().zip(y.components()).map(|(p, q)| (p - q) * (p - q)))
            .sum::<f64>()
            .sqrt())
    };
    Ok(norm(learned.0, initial.0)? + norm(learned.1, initial.1)?)
}
