//! Capture-stage geometry: a cylinder of wall panels capped by ceiling and
//! floor grids, reduced to unit directions from the stage centre.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Direction, LightError};

/// Solid angle of a cone with the given half-angle.
pub fn cone_solid_angle(half_angle: f64) -> f64 {
    TAU * (1.0 - half_angle.cos())
}

/// One light panel as seen from the stage centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub label: String,
    pub direction: Direction,
    pub solid_angle: f64,
}

/// Ordered panel set; the order defines OLAT frame indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Panel>", into = "Vec<Panel>")]
pub struct PanelLayout {
    panels: Vec<Panel>,
}

impl PanelLayout {
    pub fn new(panels: Vec<Panel>) -> Result<Self, LightError> {
        if panels.is_empty() {
            return Err(LightError::InvalidGeometry("layout has no panels".into()));
        }
        let mut total = 0.0;
        for p in &panels {
            if !(p.solid_angle.is_finite() && p.solid_angle > 0.0) {
                return Err(LightError::InvalidGeometry(format!(
                    "panel {} has solid angle {}",
                    p.label, p.solid_angle
                )));
            }
            total += p.solid_angle;
        }
        if total > 4.0 * PI * (1.0 + 1e-9) {
            return Err(LightError::InvalidGeometry(format!(
                "total solid angle {total} exceeds 4π"
            )));
        }
        Ok(Self { panels })
    }

    /// Explicit direction list, e.g. from a capture manifest. Every panel gets
    /// `solid_angle`.
    pub fn from_directions(dirs: &[Direction], solid_angle: f64) -> Result<Self, LightError> {
        Self::new(
            dirs.iter()
                .enumerate()
                .map(|(i, d)| Panel {
                    label: format!("light-{i:03}"),
                    direction: *d,
                    solid_angle,
                })
                .collect(),
        )
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.panels.iter().map(|p| p.direction).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serialises")
    }
}

impl TryFrom<Vec<Panel>> for PanelLayout {
    type Error = LightError;

    fn try_from(p: Vec<Panel>) -> Result<Self, LightError> {
        PanelLayout::new(p)
    }
}

impl From<PanelLayout> for Vec<Panel> {
    fn from(l: PanelLayout) -> Self {
        l.panels
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PanelSolidAngle {
    /// Every panel subtends a cone of this half-angle (radians).
    Cone { half_angle: f64 },
    /// Exact solid angle of each flat square panel.
    ExactRectangle,
}

/// Stage dimensions in centimetres. Panels are square with side
/// `height / rows`; ceiling and floor grids use the same pitch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageGeometry {
    pub columns: usize,
    pub rows: usize,
    pub ceiling: (usize, usize),
    pub floor: (usize, usize),
    pub diameter: f64,
    pub height: f64,
    pub solid_angle: PanelSolidAngle,
}

impl Default for StageGeometry {
    fn default() -> Self {
        Self {
            columns: 16,
            rows: 5,
            ceiling: (6, 5),
            floor: (5, 2),
            diameter: 276.0,
            height: 250.0,
            // Each panel covers roughly a 20° cone from the centre.
            solid_angle: PanelSolidAngle::Cone {
                half_angle: 10f64.to_radians(),
            },
        }
    }
}

impl StageGeometry {
    /// Same stage with every grid dimension doubled (4× the panels). Cone
    /// panels get half the half-angle.
    pub fn refined(&self) -> Self {
        let solid_angle = match self.solid_angle {
            PanelSolidAngle::Cone { half_angle } => PanelSolidAngle::Cone {
                half_angle: half_angle / 2.0,
            },
            exact => exact,
        };
        Self {
            solid_angle,
            columns: self.columns * 2,
            rows: self.rows * 2,
            ceiling: (self.ceiling.0 * 2, self.ceiling.1 * 2),
            floor: (self.floor.0 * 2, self.floor.1 * 2),
            ..*self
        }
    }

    pub fn panel_size(&self) -> f64 {
        self.height / self.rows as f64
    }
}

/// Solid angle of the axis-aligned rectangle [x1,x2]×[y1,y2] lying in a plane
/// at distance `d`, coordinates relative to the foot of the perpendicular.
fn rectangle_solid_angle(x1: f64, x2: f64, y1: f64, y2: f64, d: f64) -> f64 {
    let f = |x: f64, y: f64| (x * y / (d * (x * x + y * y + d * d).sqrt())).atan();
    f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)
}

pub fn build_stage(geom: &StageGeometry) -> Result<PanelLayout, LightError> {
    if geom.columns == 0 || geom.rows == 0 {
        return Err(LightError::InvalidGeometry("wall needs at least one row and column".into()));
    }
    if !(geom.diameter > 0.0 && geom.height > 0.0) || !geom.diameter.is_finite() || !geom.height.is_finite() {
        return Err(LightError::InvalidGeometry(format!(
            "diameter {} and height {} must be positive",
            geom.diameter, geom.height
        )));
    }
    if let PanelSolidAngle::Cone { half_angle } = geom.solid_angle {
        if !(half_angle > 0.0 && half_angle < PI) {
            return Err(LightError::InvalidGeometry(format!("cone half-angle {half_angle}")));
        }
    }
    let radius = geom.diameter / 2.0;
    let half_h = geom.height / 2.0;
    let p = geom.panel_size();
    let omega = |exact: f64| match geom.solid_angle {
        PanelSolidAngle::Cone { half_angle } => cone_solid_angle(half_angle),
        PanelSolidAngle::ExactRectangle => exact,
    };
    let mut panels = Vec::new();
    for c in 0..geom.columns {
        let phi = TAU * c as f64 / geom.columns as f64;
        for r in 0..geom.rows {
            let z = (r as f64 + 0.5) * p - half_h;
            let v = Vector3::new(radius * phi.cos(), radius * phi.sin(), z);
            panels.push(Panel {
                label: format!("wall-c{c:02}-r{r}"),
                direction: Direction::normalize(v)?,
                solid_angle: omega(rectangle_solid_angle(-p / 2.0, p / 2.0, z - p / 2.0, z + p / 2.0, radius)),
            });
        }
    }
    let mut cap = |name: &str, (nx, ny): (usize, usize), z: f64| -> Result<(), LightError> {
        for i in 0..nx {
            for j in 0..ny {
                let x = (i as f64 + 0.5 - nx as f64 / 2.0) * p;
                let y = (j as f64 + 0.5 - ny as f64 / 2.0) * p;
                panels.push(Panel {
                    label: format!("{name}-{i}-{j}"),
                    direction: Direction::normalize(Vector3::new(x, y, z))?,
                    solid_angle: omega(rectangle_solid_angle(x - p / 2.0, x + p / 2.0, y - p / 2.0, y + p / 2.0, half_h)),
                });
            }
        }
        Ok(())
    };
    cap("ceiling", geom.ceiling, half_h)?;
    cap("floor", geom.floor, -half_h)?;
    PanelLayout::new(panels)
}
