//! Linear-space relighting from OLAT stacks.

mod composite;
mod relight;
mod sequence;
mod stack;

pub use composite::{area_light_target, area_light_weights, composite, composite_values};
pub use relight::{relight_hdri, sg_panel_weights, CalibrationStage, RelightMode, RelightOptions, RelightOutput};
pub use sequence::{animate_rotation, crossfade_keyframes, FrameParam, RelitSequence};
pub use stack::{ColorSpace, FrameEntry, OlatFrame, OlatStack, StackManifest};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("expected {expected} weights, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("an OLAT stack needs at least one frame")]
    EmptyStack,
    #[error("frame {index} is {got:?}, stack frames are {expected:?}")]
    DimensionMismatch {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("a sequence needs at least one frame")]
    EmptySequence,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}
