use rayon::prelude::*;

use super::{CompositeError, OlatStack};
use crate::envmap::OlatWeights;
use crate::lightmodel::{Direction, LightSample};
use crate::radiometry::LinearImage;

/// Per-pixel `Σᵢ wᵢ ⊙ Iᵢ`. Frames are accumulated in stack order in f64, so
/// the result does not depend on how rows are scheduled.
pub fn composite_values(stack: &OlatStack, weights: &[[f64; 3]]) -> Result<LinearImage, CompositeError> {
    if weights.len() != stack.len() {
        return Err(CompositeError::SizeMismatch {
            expected: stack.len(),
            got: weights.len(),
        });
    }
    let (w, h) = stack.dims();
    let active: Vec<usize> = (0..stack.len()).filter(|&i| weights[i] != [0.0; 3]).collect();
    // Contiguous tiles: each frame is read as one sequential run per tile and
    // the f64 accumulator stays in cache.
    const TILE: usize = 3 * 4096;
    let mut data = vec![0f32; w * h * 3];
    data.par_chunks_mut(TILE).enumerate().for_each(|(t, out)| {
        let start = t * TILE;
        let mut acc = vec![0f64; out.len()];
        for &i in &active {
            // Four pixels per step so the loop vectorises; TILE is a multiple of 12.
            let pat: [f64; 12] = std::array::from_fn(|k| weights[i][k % 3]);
            let src = &stack.frames()[i].image.data()[start..start + out.len()];
            let mut a_it = acc.chunks_exact_mut(12);
            let mut p_it = src.chunks_exact(12);
            for (a, px) in (&mut a_it).zip(&mut p_it) {
                for k in 0..12 {
                    a[k] += pat[k] * px[k] as f64;
                }
            }
            for (k, (a, px)) in a_it.into_remainder().iter_mut().zip(p_it.remainder()).enumerate() {
                *a += pat[k] * *px as f64;
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.max(0.0) as f32;
        }
    });
    Ok(LinearImage::new(w, h, data).expect("composite is finite"))
}

pub fn composite(stack: &OlatStack, weights: &OlatWeights) -> Result<LinearImage, CompositeError> {
    composite_values(stack, &weights.values())
}

/// Unit-sum panel weights `wᵢ ∝ G(dᵢ; light.direction, λ(a))·Ωᵢ` simulating
/// an isotropic SG area light.
pub fn area_light_weights(stack: &OlatStack, light: &LightSample) -> Vec<f64> {
    let panels: Vec<(Direction, f64)> = stack.frames().iter().map(|f| (f.direction, f.solid_angle)).collect();
    unit_lobe_weights(&panels, &light.direction, light.sharpness())
}

pub(crate) fn unit_lobe_weights(panels: &[(Direction, f64)], axis: &Direction, lambda: f64) -> Vec<f64> {
    let raw: Vec<f64> = panels
        .iter()
        .map(|(d, omega)| (lambda * (d.dot(axis) - 1.0)).exp() * omega)
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        return raw.iter().map(|v| v / total).collect();
    }
    // Every lobe value underflowed: fall back to the closest panel.
    let best = (0..panels.len())
        .max_by(|&a, &b| panels[a].0.dot(axis).total_cmp(&panels[b].0.dot(axis)))
        .expect("non-empty layout");
    (0..panels.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
}

pub fn area_light_target(stack: &OlatStack, light: &LightSample) -> LinearImage {
    let w: Vec<[f64; 3]> = area_light_weights(stack, light).into_iter().map(|v| [v; 3]).collect();
    composite_values(stack, &w).expect("one weight per frame")
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::compositor::OlatFrame;
    use crate::lightmodel::{build_stage, StageGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_stack(seed: u64, w: usize, h: usize) -> OlatStack {
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = layout
            .panels()
            .iter()
            .map(|p| {
                let data = (0..w * h * 3).map(|_| rng.random_range(0.0..1.0f32)).collect();
                OlatFrame {
                    image: LinearImage::new(w, h, data).unwrap(),
                    direction: p.direction,
                    label: p.label.clone(),
                    solid_angle: p.solid_angle,
                }
            })
            .collect();
        OlatStack::new(frames).unwrap()
    }
}
