//! Reflectance-field relighting engine.
//!
//! OLAT (one-light-at-a-time) image stacks are linear bases of a subject's
//! reflectance field. This crate composes them under directional lights,
//! variable-size area lights and HDRI environments, and ships the support
//! kernels used around the relighting model: diffusion noising/sampling,
//! dynamic Gaussian splatting, and a synthetic renderer that serves as a
//! brute-force oracle for the compositing path.
//!
//! Coordinate conventions: world space is right-handed and z-up. Lat-long
//! maps measure inclination from +z (row 0 is the zenith) and azimuth from
//! +x towards +y.

pub mod compositor;
pub mod dyngs;
pub mod envmap;
pub mod lightmodel;
pub mod noisekit;
pub mod radiometry;
pub mod relightd;
pub mod synthoracle;

mod error;

pub use error::{Error, Result};
