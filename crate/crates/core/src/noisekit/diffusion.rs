use serde::{Deserialize, Serialize};

use super::{gaussian_noise, pyramid_noise, DiffusionSchedule, NoiseError, NoiseField, PyramidParams};
use crate::radiometry::LinearImage;

/// Image ↔ latent mapping.
pub trait LatentCodec {
    fn encode(&self, img: &LinearImage) -> Result<NoiseField, NoiseError>;
    fn decode(&self, z: &NoiseField) -> Result<LinearImage, NoiseError>;
}

/// Latent = linear RGB pixels.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityCodec;

impl LatentCodec for IdentityCodec {
    fn encode(&self, img: &LinearImage) -> Result<NoiseField, NoiseError> {
        Ok(NoiseField::from_image(img))
    }

    fn decode(&self, z: &NoiseField) -> Result<LinearImage, NoiseError> {
        z.to_image()
    }
}

/// Noise predictor. `input` is the noisy latent concatenated channel-wise
/// with the conditioning latent; the prediction must have the noisy latent's
/// shape.
pub trait Denoiser {
    fn predict(&mut self, input: &NoiseField, embedding: &[f64], t: usize) -> Result<NoiseField, NoiseError>;
}

impl<F> Denoiser for F
where
    F: FnMut(&NoiseField, &[f64], usize) -> Result<NoiseField, NoiseError>,
{
    fn predict(&mut self, input: &NoiseField, embedding: &[f64], t: usize) -> Result<NoiseField, NoiseError> {
        self(input, embedding, t)
    }
}

/// `√ᾱ_t·z0 + √(1−ᾱ_t)·ε`.
pub fn noisy_latent(
    z0: &NoiseField,
    eps: &NoiseField,
    t: usize,
    sched: &DiffusionSchedule,
) -> Result<NoiseField, NoiseError> {
    eps.check_shape(z0.shape())?;
    let ab = sched.alpha_bar(t)?;
    z0.axpby(ab.sqrt(), eps, (1.0 - ab).sqrt())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Squared L2 distance between the denoiser's prediction and `eps`.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_loss(
    denoiser: &mut dyn Denoiser,
    codec: &dyn LatentCodec,
    flat: &LinearImage,
    olat: &LinearImage,
    embedding: &[f64],
    t: usize,
    eps: &NoiseField,
    sched: &DiffusionSchedule,
    reduction: Reduction,
) -> Result<f64, NoiseError> {
    if flat.dims() != olat.dims() {
        let (w, h) = olat.dims();
        let (fw, fh) = flat.dims();
        return Err(NoiseError::ShapeMismatch {
            expected: (w, h, 3),
            got: (fw, fh, 3),
        });
    }
    let z_olat = codec.encode(olat)?;
    let z_flat = codec.encode(flat)?;
    let zt = noisy_latent(&z_olat, eps, t, sched)?;
    let input = zt.concat_channels(&z_flat)?;
    let pred = denoiser.predict(&input, embedding, t)?;
    let loss = pred.squared_distance(eps)?;
    Ok(match reduction {
        Reduction::Sum => loss,
        Reduction::Mean => loss / eps.data().len() as f64,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitNoise {
    #[default]
    Gaussian,
    Pyramid(PyramidParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdimOptions {
    pub n_steps: usize,
    pub seed: u64,
    pub init: InitNoise,
}

impl Default for DdimOptions {
    fn default() -> Self {
        Self {
            n_steps: 30,
            seed: 0,
            init: InitNoise::Gaussian,
        }
    }
}

/// `n` evenly spaced timesteps in descending order, the first being `T`:
/// `t_i = ⌈(i+1)·T/n⌉`.
pub fn ddim_timesteps(steps: usize, n: usize) -> Result<Vec<usize>, NoiseError> {
    if n == 0 || n > steps {
        return Err(NoiseError::StepOutOfRange { t: n, steps });
    }
    Ok((0..n).rev().map(|i| ((i + 1) * steps).div_ceil(n)).collect())
}

/// Deterministic (η = 0) DDIM. `observer` sees `(t, z)` after each update;
/// the last call carries the returned clean latent.
pub fn ddim_sample(
    denoiser: &mut dyn Denoiser,
    cond: &NoiseField,
    embedding: &[f64],
    sched: &DiffusionSchedule,
    opts: &DdimOptions,
    mut observer: Option<&mut dyn FnMut(usize, &NoiseField)>,
) -> Result<NoiseField, NoiseError> {
    let ts = ddim_timesteps(sched.steps(), opts.n_steps)?;
    let (w, h, c) = cond.shape();
    let mut z = match opts.init {
        InitNoise::Gaussian => gaussian_noise(w, h, c, opts.seed)?,
        InitNoise::Pyramid(p) => pyramid_noise(w, h, c, p.levels, p.discount, opts.seed)?,
    };
    for (i, &t) in ts.iter().enumerate() {
        let ab = sched.alpha_bar(t)?;
        let ab_prev = match ts.get(i + 1) {
            Some(&tp) => sched.alpha_bar(tp)?,
            None => 1.0,
        };
        let eps = denoiser.predict(&z.concat_channels(cond)?, embedding, t)?;
        eps.check_shape(z.shape())?;
        let x0 = z.axpby(1.0 / ab.sqrt(), &eps, -(1.0 - ab).sqrt() / ab.sqrt())?;
        z = x0.axpby(ab_prev.sqrt(), &eps, (1.0 - ab_prev).sqrt())?;
        if let Some(obs) = observer.as_mut() {
            obs(t, &z);
        }
    }
    Ok(z)
}
