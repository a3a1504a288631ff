use std::io::Cursor;
use std::path::Path;

use super::pfm::write_atomic;
use super::srgb::{linear_to_srgb, srgb_to_linear, BitDepth, SrgbImage};
use super::{LinearImage, RadiometryError};

fn png_err(e: impl std::fmt::Display) -> RadiometryError {
    RadiometryError::Png(e.to_string())
}

/// Encodes a linear image as an sRGB-tagged PNG. Fast deflate keeps preview
/// encoding cheap.
pub fn write_png(img: &LinearImage, depth: BitDepth) -> Result<Vec<u8>, RadiometryError> {
    let srgb = linear_to_srgb(img, depth);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, srgb.width as u32, srgb.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_source_srgb(png::SrgbRenderingIntent::Perceptual);
        enc.set_compression(png::Compression::Fast);
        let bytes: Vec<u8> = match depth {
            BitDepth::Eight => {
                enc.set_depth(png::BitDepth::Eight);
                srgb.data.iter().map(|&v| v as u8).collect()
            }
            BitDepth::Sixteen => {
                enc.set_depth(png::BitDepth::Sixteen);
                srgb.data.iter().flat_map(|v| v.to_be_bytes()).collect()
            }
        };
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&bytes).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Decodes an sRGB PNG (gray, gray+alpha, RGB or RGBA; alpha is dropped)
/// into linear radiance.
pub fn read_png(bytes: &[u8]) -> Result<LinearImage, RadiometryError> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RadiometryError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(RadiometryError::UnsupportedChannelCount(1)),
    };
    let (depth, samples): (BitDepth, Vec<u16>) = match info.bit_depth {
        png::BitDepth::Sixteen => (
            BitDepth::Sixteen,
            buf[..info.buffer_size()]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect(),
        ),
        png::BitDepth::Eight => (
            BitDepth::Eight,
            buf[..info.buffer_size()].iter().map(|&b| b as u16).collect(),
        ),
        other => return Err(RadiometryError::Png(format!("unsupported bit depth {other:?}"))),
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for px in samples.chunks_exact(channels) {
        match channels {
            1 | 2 => data.extend_from_slice(&[px[0]; 3]),
            _ => data.extend_from_slice(&px[..3]),
        }
    }
    Ok(srgb_to_linear(&SrgbImage {
        width: w,
        height: h,
        depth,
        data,
    }))
}

pub fn read_png_file(path: impl AsRef<Path>) -> Result<LinearImage, RadiometryError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| RadiometryError::io(path.display().to_string(), e))?;
    read_png(&bytes)
}

pub fn write_png_file(
    img: &LinearImage,
    depth: BitDepth,
    path: impl AsRef<Path>,
) -> Result<(), RadiometryError> {
    write_atomic(path.as_ref(), &write_png(img, depth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiometry::srgb_encode;

    #[test]
    fn black_pixel_decodes_to_zero() {
        let png = write_png(&LinearImage::black(1, 1), BitDepth::Eight).unwrap();
        let back = read_png(&png).unwrap();
        assert_eq!(back.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_within_quantization() {
        let img = LinearImage::from_fn(16, 4, |x, y| [x as f32 / 15.0, y as f32 / 3.0, 0.5]);
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let back = read_png(&write_png(&img, depth).unwrap()).unwrap();
            let half_step = 0.5 / depth.max_value() as f64;
            for (a, b) in back.data().iter().zip(img.data()) {
                let ea = srgb_encode(*a as f64);
                let eb = srgb_encode(*b as f64);
                assert!((ea - eb).abs() <= half_step + 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn grayscale_png_is_replicated() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0, 255]).unwrap();
        }
        let img = read_png(&out).unwrap();
        assert_eq!(img.pixel(1, 0), [1.0, 1.0, 1.0]);
        assert_eq!(img.pixel(0, 0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(read_png(b"not a png"), Err(RadiometryError::Png(_))));
    }
}
