//! Light directions, capture-stage geometry, Spherical Gaussians, area-light
//! size mapping and spherical-harmonic direction encodings.

mod direction;
mod sg;
mod sh;
mod stage;

pub use direction::{to_camera_space, Direction};
pub use sg::{
    sg_eval, sg_sharpness, size_from_sharpness, LightSample, SphericalGaussian, THETA_MAX, THETA_MIN,
};
pub use sh::{
    conditioning_embedding, pad_embedding, sh_encode, ShEncoding, ShInput, DEFAULT_EMBEDDING_LEN,
    SH_COEFFS, SH_DEGREE,
};
pub use stage::{build_stage, cone_solid_angle, Panel, PanelLayout, PanelSolidAngle, StageGeometry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LightError {
    #[error("vector {0:?} is not unit length")]
    NotUnit([f64; 3]),
    #[error("cannot normalise a zero or non-finite vector")]
    Degenerate,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("embedding length {0} is shorter than the 16 SH coefficients")]
    TooShort(usize),
    #[error("invalid stage geometry: {0}")]
    InvalidGeometry(String),
    #[error("rotation matrix is not orthonormal (deviation {0:e})")]
    NonOrthonormal(f64),
    #[error("invalid spherical gaussian: {0}")]
    InvalidLobe(String),
}
