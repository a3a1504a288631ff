use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CompositeError;
use crate::lightmodel::{cone_solid_angle, Direction, Panel, PanelLayout};
use crate::radiometry::{read_pfm_file, read_png_file, write_pfm_file, LinearImage};
use crate::{Error, Result};

/// One OLAT capture: the image under a single panel at unit radiance.
#[derive(Clone, Debug, PartialEq)]
pub struct OlatFrame {
    pub image: LinearImage,
    pub direction: Direction,
    pub label: String,
    /// Solid angle of the panel that lit this frame.
    pub solid_angle: f64,
}

/// Ordered, equally sized OLAT frames.
#[derive(Clone, Debug, PartialEq)]
pub struct OlatStack {
    frames: Vec<OlatFrame>,
}

impl OlatStack {
    pub fn new(frames: Vec<OlatFrame>) -> Result<Self, CompositeError> {
        let first = frames.first().ok_or(CompositeError::EmptyStack)?;
        let dims = first.image.dims();
        for (i, f) in frames.iter().enumerate() {
            if f.image.dims() != dims {
                return Err(CompositeError::DimensionMismatch {
                    index: i,
                    expected: dims,
                    got: f.image.dims(),
                });
            }
            if !(f.solid_angle.is_finite() && f.solid_angle > 0.0) {
                return Err(CompositeError::InvalidParam(format!(
                    "frame {i} has solid angle {}",
                    f.solid_angle
                )));
            }
        }
        let stack = Self { frames };
        stack.try_layout().map_err(|e| CompositeError::InvalidParam(e.to_string()))?;
        Ok(stack)
    }

    pub fn frames(&self) -> &[OlatFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].image.dims()
    }

    /// The panel layout implied by the frames' directions and solid angles.
    pub fn layout(&self) -> PanelLayout {
        self.try_layout().expect("validated on construction")
    }

    fn try_layout(&self) -> Result<PanelLayout, crate::lightmodel::LightError> {
        PanelLayout::new(
            self.frames
                .iter()
                .map(|f| Panel {
                    label: f.label.clone(),
                    direction: f.direction,
                    solid_angle: f.solid_angle,
                })
                .collect(),
        )
    }

    /// Every frame box-filtered so its longer side is at most `max_dim`.
    pub fn downscaled(&self, max_dim: usize) -> Self {
        Self {
            frames: self
                .frames
                .par_iter()
                .map(|f| OlatFrame {
                    image: f.image.downscaled(max_dim),
                    direction: f.direction,
                    label: f.label.clone(),
                    solid_angle: f.solid_angle,
                })
                .collect(),
        }
    }

    /// Loads a stack manifest; relative frame paths resolve against the
    /// manifest's directory.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text = std::fs::read_to_string(manifest_path)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        let manifest: StackManifest = serde_json::from_str(&text)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        manifest.load(base)
    }

    /// Writes every frame as little-endian PFM plus a `stack.json` manifest.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut entries = Vec::with_capacity(self.len());
        for (i, f) in self.frames.iter().enumerate() {
            let name = format!("olat_{i:03}.pfm");
            write_pfm_file(&f.image, dir.join(&name))?;
            entries.push(FrameEntry {
                path: name,
                direction: f.direction,
                label: f.label.clone(),
                solid_angle: Some(f.solid_angle),
            });
        }
        let manifest = StackManifest {
            frames: entries,
            color_space: ColorSpace::LinearPfm,
        };
        let path = dir.join("stack.json");
        crate::radiometry::write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    #[serde(rename = "linear-pfm")]
    LinearPfm,
    #[serde(rename = "srgb-png")]
    SrgbPng,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub path: String,
    pub direction: Direction,
    pub label: String,
    /// Defaults to the 20° cone when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid_angle: Option<f64>,
}

/// On-disk description of an OLAT stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    pub frames: Vec<FrameEntry>,
    pub color_space: ColorSpace,
}

impl StackManifest {
    pub fn load(&self, base: &Path) -> Result<OlatStack> {
        let default_omega = cone_solid_angle(10f64.to_radians());
        let frames = self
            .frames
            .par_iter()
            .map(|e| {
                let p = Path::new(&e.path);
                let p = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                let image = match self.color_space {
                    ColorSpace::LinearPfm => read_pfm_file(&p)?,
                    ColorSpace::SrgbPng => read_png_file(&p)?,
                };
                Ok(OlatFrame {
                    image,
                    direction: e.direction,
                    label: e.label.clone(),
                    solid_angle: e.solid_angle.unwrap_or(default_omega),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OlatStack::new(frames)?)
    }
}
