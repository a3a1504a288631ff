use serde::{Deserialize, Serialize};

use super::RadiometryError;

/// Per-channel multiplicative colour correction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactor3 {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ScaleFactor3 {
    pub const ONE: ScaleFactor3 = ScaleFactor3 {
        r: 1.0,
        g: 1.0,
        b: 1.0,
    };

    pub fn new(r: f64, g: f64, b: f64) -> Result<Self, RadiometryError> {
        let s = Self { r, g, b };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), RadiometryError> {
        let v = self.as_array();
        if v.iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(RadiometryError::InvalidScale(v))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn inverse(&self) -> Self {
        Self {
            r: 1.0 / self.r,
            g: 1.0 / self.g,
            b: 1.0 / self.b,
        }
    }
}

/// Linear-space patch means of a photographed colour chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct ColorChart {
    patches: Vec<[f64; 3]>,
}

impl ColorChart {
    pub fn new(patches: Vec<[f64; 3]>) -> Result<Self, RadiometryError> {
        if patches.is_empty() {
            return Err(RadiometryError::InvalidChart("no patches".into()));
        }
        for (i, p) in patches.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite() && *c > 0.0) {
                return Err(RadiometryError::InvalidChart(format!(
                    "patch {i} has a non-positive component: {p:?}"
                )));
            }
        }
        Ok(Self { patches })
    }

    pub fn patches(&self) -> &[[f64; 3]] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

impl TryFrom<Vec<[f64; 3]>> for ColorChart {
    type Error = RadiometryError;

    fn try_from(patches: Vec<[f64; 3]>) -> Result<Self, Self::Error> {
        ColorChart::new(patches)
    }
}

impl From<ColorChart> for Vec<[f64; 3]> {
    fn from(chart: ColorChart) -> Self {
        chart.patches
    }
}

/// Least-squares per-channel factor mapping `observed` onto `reference`:
/// `s_c = Σ ref·obs / Σ obs²`.
pub fn calibrate_color(
    reference: &ColorChart,
    observed: &ColorChart,
) -> Result<ScaleFactor3, RadiometryError> {
    if reference.len() != observed.len() {
        return Err(RadiometryError::ChartMismatch {
            reference: reference.len(),
            observed: observed.len(),
        });
    }
    let mut s = [0.0; 3];
    for (c, out) in s.iter_mut().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for (r, o) in reference.patches.iter().zip(&observed.patches) {
            num += r[c] * o[c];
            den += o[c] * o[c];
        }
        if den == 0.0 {
            return Err(RadiometryError::DegenerateChart(c));
        }
        *out = num / den;
    }
    ScaleFactor3::new(s[0], s[1], s[2])
}
