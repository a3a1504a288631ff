use serde::{Deserialize, Serialize};

use super::NoiseError;

/// Cumulative products `ᾱ_t` for `t = 1..=T`, stored at index `t − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiffusionSchedule {
    alphas: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(alphas: Vec<f64>) -> Result<Self, NoiseError> {
        if alphas.is_empty() {
            return Err(NoiseError::InvalidSchedule("no steps".into()));
        }
        if let Some(i) = alphas.iter().position(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(NoiseError::InvalidSchedule(format!(
                "alpha_bar[{}] = {} outside (0, 1]",
                i + 1,
                alphas[i]
            )));
        }
        if let Some(i) = alphas.windows(2).position(|w| w[1] > w[0]) {
            return Err(NoiseError::InvalidSchedule(format!("alpha_bar increases at step {}", i + 2)));
        }
        Ok(Self { alphas })
    }

    /// `ᾱ_t = Π (1 − β_s)` for a caller-supplied β sequence.
    pub fn from_betas(betas: &[f64]) -> Result<Self, NoiseError> {
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && **b < 1.0)) {
            return Err(NoiseError::InvalidSchedule(format!("beta {b} outside [0, 1)")));
        }
        let mut acc = 1.0;
        Self::new(
            betas
                .iter()
                .map(|b| {
                    acc *= 1.0 - b;
                    acc
                })
                .collect(),
        )
    }

    /// β evenly spaced in `[beta_start, beta_end]` over `steps`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self, NoiseError> {
        if steps == 0 {
            return Err(NoiseError::InvalidSchedule("no steps".into()));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(&betas)
    }

    /// Squared-cosine schedule with offset `s`; β capped at 0.999.
    pub fn cosine(steps: usize, s: f64) -> Result<Self, NoiseError> {
        if steps == 0 || !(s >= 0.0) {
            return Err(NoiseError::InvalidSchedule(format!("cosine schedule steps={steps} s={s}")));
        }
        let f = |t: f64| ((t / steps as f64 + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2).cos().powi(2);
        let betas: Vec<f64> = (1..=steps)
            .map(|t| (1.0 - f(t as f64) / f(t as f64 - 1.0)).clamp(0.0, 0.999))
            .collect();
        Self::from_betas(&betas)
    }

    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// `ᾱ_t` for `1 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64, NoiseError> {
        if t == 0 || t > self.alphas.len() {
            return Err(NoiseError::StepOutOfRange {
                t,
                steps: self.alphas.len(),
            });
        }
        Ok(self.alphas[t - 1])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Per-step `β_t = 1 − ᾱ_t / ᾱ_{t−1}`.
    pub fn betas(&self) -> Vec<f64> {
        let mut prev = 1.0;
        self.alphas
            .iter()
            .map(|a| {
                let b = 1.0 - a / prev;
                prev = *a;
                b
            })
            .collect()
    }
}

impl Default for DiffusionSchedule {
    /// Linear β from 1e-4 to 2e-2 over 1000 steps.
    fn default() -> Self {
        Self::linear(1000, 1e-4, 2e-2).expect("valid preset")
    }
}

impl TryFrom<Vec<f64>> for DiffusionSchedule {
    type Error = NoiseError;

    fn try_from(v: Vec<f64>) -> Result<Self, NoiseError> {
        Self::new(v)
    }
}

impl From<DiffusionSchedule> for Vec<f64> {
    fn from(s: DiffusionSchedule) -> Self {
        s.alphas
    }
}
