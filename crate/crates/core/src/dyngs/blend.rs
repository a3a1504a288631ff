use nalgebra::{Matrix2, Vector2};

use super::SplatError;

/// Screen covariances with a larger eigenvalue ratio are rejected.
pub const MAX_CONDITION: f64 = 1e8;

/// A projected splat covering the pixel: peak opacity, screen-space mean
/// and covariance, and color.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub opacity: f64,
    pub mean: [f64; 2],
    pub covariance: Matrix2<f64>,
    pub color: [f64; 3],
}

fn inverse(cov: &Matrix2<f64>) -> Result<Matrix2<f64>, SplatError> {
    let (a, b, d) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (mid + rad, mid - rad);
    if !(lo > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(SplatError::SingularCovariance(f64::INFINITY));
    }
    let cond = hi / lo;
    if cond > MAX_CONDITION {
        return Err(SplatError::SingularCovariance(cond));
    }
    let det = a * d - b * b;
    Ok(Matrix2::new(d, -b, -b, a) / det)
}

/// Front-to-back alpha blending at pixel `p` over the clean-plate color
/// `background`. Returns the composited color and the accumulated alpha.
pub fn pixel_blend(
    contributions: &[Contribution],
    p: [f64; 2],
    background: [f64; 3],
) -> Result<([f64; 3], f64), SplatError> {
    let p = Vector2::from(p);
    let mut color = [0.0; 3];
    let mut transmittance = 1.0;
    let mut alpha = 0.0;
    for c in contributions {
        let inv = inverse(&c.covariance)?;
        let d = p - Vector2::from(c.mean);
        let q = (d.transpose() * inv * d)[0];
        let a = (c.opacity.clamp(0.0, 1.0) * (-0.5 * q).exp()).clamp(0.0, 1.0);
        let w = transmittance * a;
        for k in 0..3 {
            color[k] += w * c.color[k];
        }
        alpha += w;
        transmittance *= 1.0 - a;
    }
    let alpha = alpha.clamp(0.0, 1.0);
    for k in 0..3 {
        color[k] += (1.0 - alpha) * background[k];
    }
    Ok((color, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(p: [f64; 2], opacity: f64, color: [f64; 3]) -> Contribution {
        Contribution {
            opacity,
            mean: p,
            covariance: Matrix2::new(4.0, 0.0, 0.0, 4.0),
            color,
        }
    }

    #[test]
    fn empty_is_background() {
        assert_eq!(pixel_blend(&[], [3.0, 4.0], [0.1, 0.2, 0.3]).unwrap(), ([0.1, 0.2, 0.3], 0.0));
    }

    #[test]
    fn full_coverage() {
        let c = at([2.0, 2.0], 1.0, [0.3, 0.6, 0.9]);
        assert_eq!(pixel_blend(&[c], [2.0, 2.0], [1.0; 3]).unwrap(), ([0.3, 0.6, 0.9], 1.0));
    }

    #[test]
    fn red_over_blue() {
        let red = at([0.0, 0.0], 0.5, [1.0, 0.0, 0.0]);
        let blue = at([0.0, 0.0], 0.5, [0.0, 0.0, 1.0]);
        let (c, a) = pixel_blend(&[red, blue], [0.0, 0.0], [0.0; 3]).unwrap();
        assert_eq!((c, a), ([0.5, 0.0, 0.25], 0.75));
    }

    #[test]
    fn falloff_uses_inverse_covariance() {
        // One standard deviation along x for Σ' = diag(4, 1): α = e^{-1/2}.
        let c = Contribution {
            opacity: 1.0,
            mean: [0.0, 0.0],
            covariance: Matrix2::new(4.0, 0.0, 0.0, 1.0),
            color: [1.0; 3],
        };
        let (_, a) = pixel_blend(&[c], [2.0, 0.0], [0.0; 3]).unwrap();
        assert!((a - (-0.5f64).exp()).abs() < 1e-15);
        let (_, a) = pixel_blend(&[c], [0.0, 1.0], [0.0; 3]).unwrap();
        assert!((a - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn singular_covariance() {
        let mut c = at([0.0, 0.0], 1.0, [1.0; 3]);
        c.covariance = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(pixel_blend(&[c], [0.0, 0.0], [0.0; 3]), Err(SplatError::SingularCovariance(_))));
        c.covariance = Matrix2::new(1.0, 0.0, 0.0, 1e-9);
        assert!(matches!(pixel_blend(&[c], [0.0, 0.0], [0.0; 3]), Err(SplatError::SingularCovariance(_))));
        c.covariance = Matrix2::new(1.0, 0.0, 0.0, 1e-7);
        assert!(pixel_blend(&[c], [0.0, 0.0], [0.0; 3]).is_ok());
    }

    fn contribution() -> impl Strategy<Value = Contribution> {
        (0.0f64..=1.0, prop::array::uniform2(-5.0f64..5.0), 0.1f64..5.0, 0.1f64..5.0, -0.9f64..0.9, prop::array::uniform3(0.0f64..2.0)).prop_map(
            |(opacity, mean, sx, sy, rho, color)| Contribution {
                opacity,
                mean,
                covariance: Matrix2::new(sx * sx, rho * sx * sy, rho * sx * sy, sy * sy),
                color,
            },
        )
    }

    proptest! {
        #[test]
        fn alpha_bounds_and_matting_identity(
            cs in prop::collection::vec(contribution(), 0..12),
            p in prop::array::uniform2(-5.0f64..5.0),
            bg in prop::array::uniform3(0.0f64..3.0),
        ) {
            let (c0, a0) = pixel_blend(&cs, p, [0.0; 3]).unwrap();
            let (cb, ab) = pixel_blend(&cs, p, bg).unwrap();
            prop_assert!((0.0..=1.0).contains(&a0));
            prop_assert_eq!(a0, ab);
            let cmax = cs.iter().flat_map(|c| c.color).fold(0.0, f64::max);
            for k in 0..3 {
                prop_assert!(c0[k] <= a0 * cmax + 1e-12);
                prop_assert_eq!(cb[k], c0[k] + (1.0 - a0) * bg[k]);
            }
        }
    }
}
