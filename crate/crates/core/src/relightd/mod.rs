//! Command-line front end and HTTP preview service.

pub mod cli;
pub mod server;

use sha2::{Digest, Sha256};

use crate::lightmodel::{Direction, LightError};
use crate::radiometry::{write_pfm, write_png, BitDepth, Endian, LinearImage, RadiometryError};

pub use server::{router, serve, AppState, ServerConfig};

/// Transport encoding for rendered images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ImageFormat {
    /// 8-bit sRGB PNG.
    #[default]
    Png,
    /// Little-endian linear PFM.
    Pfm,
}

impl ImageFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "png" => Some(Self::Png),
            "pfm" => Some(Self::Pfm),
            _ => None,
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::Png => "image/png",
            Self::Pfm => "image/x-portable-floatmap",
        }
    }
}

pub fn encode_image(img: &LinearImage, format: ImageFormat) -> Result<Vec<u8>, RadiometryError> {
    match format {
        ImageFormat::Png => write_png(img, BitDepth::Eight),
        ImageFormat::Pfm => Ok(write_pfm(img, Endian::Little)),
    }
}

/// Lowercase hex SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `x,y,z` and normalises it.
pub fn parse_direction(s: &str) -> Result<Direction, LightError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| LightError::Degenerate)?;
    match parts[..] {
        [x, y, z] => Direction::normalize(nalgebra::Vector3::new(x, y, z)),
        _ => Err(LightError::Degenerate),
    }
}
