//! Equirectangular environment maps, HDRI → OLAT weight extraction and
//! Spherical Gaussian fitting.

mod latlong;
mod nnls;
mod sgfit;
mod weights;

pub use latlong::{texel_direction, texel_solid_angle, EnvironmentMap, Filter};
pub use nnls::nnls;
pub use sgfit::{fit_sgs, FitOptions, SgFit, SgSet};
pub use weights::{hdri_to_olat_weights, region_assignment, OlatWeights, Regions, WeightEntry, WeightMode};

use thiserror::Error;

use crate::radiometry::RadiometryError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("texel ({row}, {col}) outside a {width}x{height} map")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("lat-long map must be twice as wide as tall, got {width}x{height}")]
    BadAspect { width: usize, height: usize },
    #[error("environment radiance must be non-negative")]
    NegativeRadiance,
    #[error("panel {index} ({label}) receives no texels; increase the map resolution")]
    EmptyRegion { index: usize, label: String },
    #[error("SG fit did not converge after {} iterations (relative residual {:.3e})", .fit.iterations, .fit.relative_residual)]
    NonConvergence { fit: Box<SgFit> },
    #[error("invalid fit parameters: {0}")]
    InvalidFit(String),
    #[error("weight file lists {got} panels, layout has {expected}")]
    WeightCount { expected: usize, got: usize },
    #[error(transparent)]
    Image(#[from] RadiometryError),
}
