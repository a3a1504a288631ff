use serde::{Deserialize, Serialize};

use super::{relight_hdri, CompositeError, OlatStack, RelightOptions};
use crate::envmap::EnvironmentMap;
use crate::lightmodel::LightSample;
use crate::radiometry::LinearImage;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameParam {
    Light(LightSample),
    Rotation(f64),
    /// Blended between two keyframes.
    Interpolated { from: usize, to: usize, t: f64 },
}

#[derive(Clone, Debug)]
pub struct RelitSequence {
    frames: Vec<LinearImage>,
    params: Vec<FrameParam>,
}

impl RelitSequence {
    pub fn new(frames: Vec<LinearImage>, params: Vec<FrameParam>) -> Result<Self, CompositeError> {
        let first = frames.first().ok_or(CompositeError::EmptySequence)?.dims();
        if params.len() != frames.len() {
            return Err(CompositeError::SizeMismatch {
                expected: frames.len(),
                got: params.len(),
            });
        }
        for (index, f) in frames.iter().enumerate() {
            if f.dims() != first {
                return Err(CompositeError::DimensionMismatch {
                    index,
                    expected: first,
                    got: f.dims(),
                });
            }
        }
        Ok(Self { frames, params })
    }

    /// Frames without lighting metadata, e.g. loaded from disk.
    pub fn from_frames(frames: Vec<LinearImage>) -> Result<Self, CompositeError> {
        let params = (0..frames.len()).map(|_| FrameParam::Rotation(0.0)).collect();
        Self::new(frames, params)
    }

    pub fn frames(&self) -> &[LinearImage] {
        &self.frames
    }

    pub fn params(&self) -> &[FrameParam] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<LinearImage> {
        self.frames
    }
}

/// Frame k is relit under `env` rotated by `k·total_delta/(n_frames−1)`
/// about the vertical axis.
pub fn animate_rotation(
    stack: &OlatStack,
    env: &EnvironmentMap,
    n_frames: usize,
    total_delta: f64,
    opts: &RelightOptions,
) -> Result<RelitSequence> {
    if n_frames == 0 {
        return Err(CompositeError::EmptySequence.into());
    }
    let mut frames = Vec::with_capacity(n_frames);
    let mut params = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let angle = if n_frames == 1 {
            0.0
        } else {
            k as f64 * total_delta / (n_frames - 1) as f64
        };
        frames.push(relight_hdri(stack, &env.rotate(angle), opts)?.image);
        params.push(FrameParam::Rotation(angle));
    }
    Ok(RelitSequence::new(frames, params)?)
}

/// Keeps frames 0, step, 2·step, … and the last frame verbatim and linearly
/// blends everything in between.
pub fn crossfade_keyframes(seq: &RelitSequence, step: usize) -> Result<RelitSequence, CompositeError> {
    if step == 0 {
        return Err(CompositeError::InvalidParam("step must be at least 1".into()));
    }
    let n = seq.len();
    let mut frames = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    for t in 0..n {
        let k0 = t / step * step;
        if t == k0 || t == n - 1 {
            frames.push(seq.frames[t].clone());
            params.push(seq.params[t].clone());
            continue;
        }
        let k1 = (k0 + step).min(n - 1);
        let w = (t - k0) as f64 / (k1 - k0) as f64;
        let (a, b) = (seq.frames[k0].data(), seq.frames[k1].data());
        let data = a
            .iter()
            .zip(b)
            .map(|(x, y)| ((1.0 - w) * *x as f64 + w * *y as f64) as f32)
            .collect();
        let (wd, ht) = seq.frames[k0].dims();
        frames.push(LinearImage::new(wd, ht, data).expect("blend of finite frames"));
        params.push(FrameParam::Interpolated { from: k0, to: k1, t: w });
    }
    RelitSequence::new(frames, params)
}
