//! Dynamic Gaussian-splatting kernels: covariance construction and
//! projection, per-pixel alpha blending over a clean plate, segment planning,
//! keyframe initialisation transfer and the keyframe deformation regulariser.

mod blend;
mod io;
mod plan;
mod splat;

pub use blend::{pixel_blend, Contribution, MAX_CONDITION};
pub use io::{read_splats, write_splats, SplatSidecar, SPLAT_FIELDS};
pub use plan::{plan_segments, plan_segments_by_length, Phase, PhaseSchedule, SegmentPlan};
pub use splat::{
    build_covariance, init_segment, l_reg, project_covariance, DeformationOffset, InitReport, Splat, MIN_SCALE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplatError {
    #[error("invalid splat: {0}")]
    InvalidSplat(String),
    #[error("screen covariance is singular or ill-conditioned (condition {0:.3e})")]
    SingularCovariance(f64),
    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),
    #[error("{what}: expected {expected} entries, got {got}")]
    Misaligned { what: &'static str, expected: usize, got: usize },
    #[error("malformed splat file: {0}")]
    Format(String),
}
