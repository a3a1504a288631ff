use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::latlong::solid_angle_unchecked;
use super::{EnvError, EnvironmentMap};
use crate::lightmodel::PanelLayout;

/// How a panel's Voronoi region of the environment becomes its OLAT weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Region mean radiance times the region's solid angle, i.e. the
    /// radiance integral over the region. Compositing with these weights
    /// approximates the full environment integral.
    #[default]
    EnergyPreserving,
    /// Solid-angle-weighted mean radiance of the region.
    RegionMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub label: String,
    pub weight: [f64; 3],
}

/// One RGB weight per panel, in layout order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OlatWeights {
    pub entries: Vec<WeightEntry>,
}

impl OlatWeights {
    pub fn from_values(labels: impl IntoIterator<Item = String>, weights: Vec<[f64; 3]>) -> Self {
        Self {
            entries: labels
                .into_iter()
                .zip(weights)
                .map(|(label, weight)| WeightEntry { label, weight })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<[f64; 3]> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn total(&self) -> [f64; 3] {
        self.entries.iter().fold([0.0; 3], |a, e| {
            [a[0] + e.weight[0], a[1] + e.weight[1], a[2] + e.weight[2]]
        })
    }
}

/// Nearest-panel partition of the environment's texels.
#[derive(Clone, Debug, PartialEq)]
pub struct Regions {
    /// Panel index of every texel, row-major.
    pub assignment: Vec<usize>,
    /// Solid angle covered by each panel's region.
    pub solid_angle: Vec<f64>,
}

/// Assigns every texel to the panel whose direction is closest (largest dot
/// product, lowest index on ties), using the texel's world direction.
pub fn region_assignment(env: &EnvironmentMap, layout: &PanelLayout) -> Regions {
    let (w, h) = (env.width(), env.height());
    let dirs: Vec<_> = layout.directions();
    let assignment: Vec<usize> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let dirs = &dirs;
            (0..w).map(move |col| {
                let d = env.world_texel_direction(row, col);
                let mut best = 0;
                let mut best_dot = f64::NEG_INFINITY;
                for (i, p) in dirs.iter().enumerate() {
                    let dot = p.dot(&d);
                    if dot > best_dot {
                        best_dot = dot;
                        best = i;
                    }
                }
                best
            })
        })
        .collect();
    let mut solid_angle = vec![0.0; layout.len()];
    for (t, &i) in assignment.iter().enumerate() {
        solid_angle[i] += solid_angle_unchecked(t / w, w, h);
    }
    Regions {
        assignment,
        solid_angle,
    }
}

/// Per-panel weights from the panel's region of the environment.
pub fn hdri_to_olat_weights(
    env: &EnvironmentMap,
    layout: &PanelLayout,
    mode: WeightMode,
) -> Result<OlatWeights, EnvError> {
    let regions = region_assignment(env, layout);
    let (w, h) = (env.width(), env.height());
    let mut sums = vec![[0.0f64; 3]; layout.len()];
    // Fixed texel order keeps the reduction deterministic.
    for row in 0..h {
        let omega = solid_angle_unchecked(row, w, h);
        let pixels = env.image().row(row);
        for col in 0..w {
            let i = regions.assignment[row * w + col];
            let px = &pixels[col * 3..col * 3 + 3];
            for c in 0..3 {
                sums[i][c] += omega * px[c] as f64;
            }
        }
    }
    for (i, area) in regions.solid_angle.iter().enumerate() {
        if *area == 0.0 {
            return Err(EnvError::EmptyRegion {
                index: i,
                label: layout.panels()[i].label.clone(),
            });
        }
    }
    let weights = match mode {
        WeightMode::EnergyPreserving => sums,
        WeightMode::RegionMean => sums
            .iter()
            .zip(&regions.solid_angle)
            .map(|(s, a)| s.map(|v| v / a))
            .collect(),
    };
    Ok(OlatWeights::from_values(
        layout.panels().iter().map(|p| p.label.clone()),
        weights,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightmodel::{build_stage, Direction, Panel, StageGeometry};
    use crate::radiometry::LinearImage;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn octahedron() -> PanelLayout {
        let dirs = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        PanelLayout::new(
            dirs.iter()
                .enumerate()
                .map(|(i, d)| Panel {
                    label: format!("p{i}"),
                    direction: Direction::normalize(Vector3::from(*d)).unwrap(),
                    solid_angle: 0.5,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_env_region_means_equal_radiance() {
        let env = EnvironmentMap::constant(64, [0.7, 0.2, 1.5]);
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let w = hdri_to_olat_weights(&env, &layout, WeightMode::RegionMean).unwrap();
        for e in &w.entries {
            for (c, want) in [0.7, 0.2, 1.5].iter().enumerate() {
                assert!((e.weight[c] - want).abs() < 1e-6 * want);
            }
        }
    }

    #[test]
    fn single_texel_lands_in_exactly_one_region() {
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let (w, h) = (128, 64);
        let (row, col) = (20, 37);
        let mut img = LinearImage::black(w, h);
        img.set_pixel(col, row, [5.0, 5.0, 5.0]);
        let env = EnvironmentMap::new(img).unwrap();
        let weights = hdri_to_olat_weights(&env, &layout, WeightMode::EnergyPreserving).unwrap();
        // Brute-force owner of the texel.
        let d = env.world_texel_direction(row, col);
        let owner = (0..layout.len())
            .max_by(|&a, &b| layout.panels()[a].direction.dot(&d).total_cmp(&layout.panels()[b].direction.dot(&d)))
            .unwrap();
        for (i, e) in weights.entries.iter().enumerate() {
            if i == owner {
                assert!(e.weight[0] > 0.0);
            } else {
                assert_eq!(e.weight, [0.0; 3], "panel {i}");
            }
        }
    }

    #[test]
    fn symmetric_rotation_permutes_weights() {
        let layout = octahedron();
        let env = EnvironmentMap::from_fn(32, |d| [1.0 + d.x().max(0.0) * 3.0, 1.0 + d.y().powi(2), 0.5 + d.z().max(0.0)]);
        let base = hdri_to_olat_weights(&env, &layout, WeightMode::EnergyPreserving).unwrap();
        let rotated = hdri_to_olat_weights(&env.rotate(FRAC_PI_2), &layout, WeightMode::EnergyPreserving).unwrap();
        // +x → +y → −x → −y under a quarter turn; poles stay put.
        let perm = [1, 2, 3, 0, 4, 5];
        for (i, &j) in perm.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (base.entries[i].weight[c], rotated.entries[j].weight[c]);
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{i}->{j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn weights_are_linear_in_the_environment() {
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let e1 = EnvironmentMap::from_fn(32, |d| [d.x().abs(), 1.0, d.z().max(0.0)]);
        let e2 = EnvironmentMap::from_fn(32, |d| [0.25, d.y().abs(), 2.0 * d.x().powi(2)]);
        let (a, b) = (2.0f32, 0.5f32);
        let combo = LinearImage::new(
            64,
            32,
            e1.image().data().iter().zip(e2.image().data()).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let combo = EnvironmentMap::new(combo).unwrap();
        let w1 = hdri_to_olat_weights(&e1, &layout, WeightMode::EnergyPreserving).unwrap();
        let w2 = hdri_to_olat_weights(&e2, &layout, WeightMode::EnergyPreserving).unwrap();
        let wc = hdri_to_olat_weights(&combo, &layout, WeightMode::EnergyPreserving).unwrap();
        for i in 0..layout.len() {
            for c in 0..3 {
                let want = a as f64 * w1.entries[i].weight[c] + b as f64 * w2.entries[i].weight[c];
                let got = wc.entries[i].weight[c];
                assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-12), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn energy_is_retained_for_full_sphere_layouts() {
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let env = EnvironmentMap::from_fn(64, |d| [1.0 + d.x(), (3.0 * d.z()).exp(), 0.1]);
        let total = env.integrate();
        let energy = hdri_to_olat_weights(&env, &layout, WeightMode::EnergyPreserving).unwrap();
        let means = hdri_to_olat_weights(&env, &layout, WeightMode::RegionMean).unwrap();
        let regions = region_assignment(&env, &layout);
        let from_means = means
            .entries
            .iter()
            .zip(&regions.solid_angle)
            .fold([0.0; 3], |acc, (e, a)| [acc[0] + e.weight[0] * a, acc[1] + e.weight[1] * a, acc[2] + e.weight[2] * a]);
        let summed = energy.total();
        for c in 0..3 {
            assert!((summed[c] - total[c]).abs() <= 1e-6 * total[c]);
            assert!((from_means[c] - total[c]).abs() <= 1e-6 * total[c]);
        }
        let area: f64 = regions.solid_angle.iter().sum();
        assert!((area - 4.0 * PI).abs() < 4.0 * PI * 1e-3);
    }

    #[test]
    fn low_resolution_leaves_regions_empty() {
        let layout = build_stage(&StageGeometry::default()).unwrap();
        let env = EnvironmentMap::constant(4, [1.0; 3]);
        assert!(matches!(
            hdri_to_olat_weights(&env, &layout, WeightMode::EnergyPreserving),
            Err(EnvError::EmptyRegion { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let w = OlatWeights::from_values(vec!["a".to_string()], vec![[1.0, 2.0, 3.0]]);
        let v: serde_json::Value = serde_json::to_value(&w).unwrap();
        assert_eq!(v[0]["label"], "a");
        assert_eq!(v[0]["weight"][2], 3.0);
    }
}
