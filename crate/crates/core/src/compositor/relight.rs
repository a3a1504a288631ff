use serde::{Deserialize, Serialize};

use super::composite::{composite_values, unit_lobe_weights};
use super::OlatStack;
use crate::envmap::{fit_sgs, hdri_to_olat_weights, EnvError, EnvironmentMap, FitOptions, OlatWeights, SgFit, SgSet, WeightMode};
use crate::lightmodel::{sg_sharpness, size_from_sharpness, Direction, PanelLayout};
use crate::radiometry::{apply_scale, LinearImage, ScaleFactor3};
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelightMode {
    #[default]
    Olat,
    Sg,
}

/// Where a color-chart correction enters the pipeline. Both give the same
/// image up to rounding; `Pre` also reports corrected weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationStage {
    Pre,
    #[default]
    Post,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelightOptions {
    pub mode: RelightMode,
    pub weight_mode: WeightMode,
    pub fit: FitOptions,
    pub calibration: Option<ScaleFactor3>,
    pub calibration_stage: CalibrationStage,
}

impl RelightOptions {
    pub fn with_mode(mode: RelightMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelightOutput {
    pub image: LinearImage,
    pub weights: OlatWeights,
    /// Present in SG mode.
    pub fit: Option<SgFit>,
    pub warnings: Vec<String>,
}

/// Panel weights reproducing a set of SG lights. Each lobe becomes a
/// unit-sum area light of size `a = size_from_sharpness(λ)`, scaled by the
/// lobe's radiance integral `A·2π/λ·(1−e^{−2λ})`.
pub fn sg_panel_weights(layout: &PanelLayout, set: &SgSet) -> Vec<[f64; 3]> {
    let panels: Vec<(Direction, f64)> = layout.panels().iter().map(|p| (p.direction, p.solid_angle)).collect();
    let mut out = vec![[0.0; 3]; panels.len()];
    for g in &set.gaussians {
        let a = size_from_sharpness(g.sharpness);
        let lambda = sg_sharpness(a).expect("size is clamped to [0, 1]");
        let n = unit_lobe_weights(&panels, &g.axis, lambda);
        let e = g.lobe_integral();
        for (o, ni) in out.iter_mut().zip(&n) {
            for c in 0..3 {
                o[c] += g.amplitude[c] * e * ni;
            }
        }
    }
    out
}

/// Relights `stack` under `env`. A non-converged SG fit is reported in
/// `warnings` and its best iterate is used.
pub fn relight_hdri(stack: &OlatStack, env: &EnvironmentMap, opts: &RelightOptions) -> Result<RelightOutput> {
    let layout = stack.layout();
    let mut warnings = Vec::new();
    let (mut values, fit) = match opts.mode {
        RelightMode::Olat => (hdri_to_olat_weights(env, &layout, opts.weight_mode)?.values(), None),
        RelightMode::Sg => {
            let fit = match fit_sgs(env, &opts.fit) {
                Ok(f) => f,
                Err(EnvError::NonConvergence { fit }) => {
                    warnings.push(format!(
                        "SG fit stopped after {} iterations, relative residual {:.4}",
                        fit.iterations, fit.relative_residual
                    ));
                    *fit
                }
                Err(e) => return Err(e.into()),
            };
            for g in &fit.set.gaussians {
                let a = size_from_sharpness(g.sharpness);
                if a == 0.0 || a == 1.0 {
                    warnings.push(format!("lobe sharpness {:.4} clamped to size {a}", g.sharpness));
                }
            }
            (sg_panel_weights(&layout, &fit.set), Some(fit))
        }
    };
    let pre = opts.calibration_stage == CalibrationStage::Pre;
    if let (Some(s), true) = (opts.calibration, pre) {
        let s = s.as_array();
        for w in &mut values {
            for c in 0..3 {
                w[c] *= s[c];
            }
        }
    }
    let mut image = composite_values(stack, &values)?;
    if let (Some(s), false) = (opts.calibration, pre) {
        image = apply_scale(&image, s);
    }
    let labels = stack.frames().iter().map(|f| f.label.clone());
    Ok(RelightOutput {
        image,
        weights: OlatWeights::from_values(labels, values),
        fit,
        warnings,
    })
}
