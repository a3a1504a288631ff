//! Diffusion-support kernels: pyramid noise, noising schedules, forward
//! noising, the denoising loss and deterministic DDIM sampling against a
//! pluggable denoiser.

mod diffusion;
mod field;
mod pyramid;
mod schedule;

pub use diffusion::{
    ddim_sample, ddim_timesteps, diffusion_loss, noisy_latent, DdimOptions, Denoiser, IdentityCodec, InitNoise,
    LatentCodec, Reduction,
};
pub use field::NoiseField;
pub use pyramid::{gaussian_noise, noise_stats, pyramid_noise, NoiseStats, PyramidParams};
pub use schedule::DiffusionSchedule;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("timestep {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("schedule: {0}")]
    InvalidSchedule(String),
}
