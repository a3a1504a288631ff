//! Image containers, sRGB transfer, PFM/PNG I/O and colour-chart calibration.

mod calibration;
mod image;
mod pfm;
mod png_io;
mod srgb;

pub use calibration::{calibrate_color, ColorChart, ScaleFactor3};
pub use image::{apply_scale, LinearImage};
pub use pfm::{read_pfm, read_pfm_file, write_atomic, write_pfm, write_pfm_file, Endian};
pub use png_io::{read_png, read_png_file, write_png, write_png_file};
pub use srgb::{linear_to_srgb, srgb_decode, srgb_encode, srgb_to_linear, BitDepth, SrgbImage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RadiometryError {
    #[error("image data length {len} does not match {width}x{height}x3")]
    BadDimensions { width: usize, height: usize, len: usize },
    #[error("image contains a non-finite component at index {0}")]
    NonFinite(usize),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("unsupported channel count {0}")]
    UnsupportedChannelCount(usize),
    #[error("png: {0}")]
    Png(String),
    #[error("colour charts differ in patch count ({reference} vs {observed})")]
    ChartMismatch { reference: usize, observed: usize },
    #[error("colour chart channel {0} has zero energy")]
    DegenerateChart(usize),
    #[error("invalid colour chart: {0}")]
    InvalidChart(String),
    #[error("scale factors must be positive and finite, got {0:?}")]
    InvalidScale([f64; 3]),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl RadiometryError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RadiometryError::Io {
            context: context.into(),
            source,
        }
    }
}
