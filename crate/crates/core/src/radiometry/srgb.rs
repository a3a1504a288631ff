use super::LinearImage;

/// Storage depth of an encoded sRGB raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

/// Quantized sRGB-encoded raster (interleaved RGB, row 0 at the top).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SrgbImage {
    pub width: usize,
    pub height: usize,
    pub depth: BitDepth,
    pub data: Vec<u16>,
}

/// sRGB opto-electronic transfer of a single linear value. Input is clamped
/// to [0, 1]; NaN maps to 0.
pub fn srgb_encode(x: f64) -> f64 {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

/// Inverse of [`srgb_encode`] on [0, 1].
pub fn srgb_decode(v: f64) -> f64 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(img: &LinearImage, depth: BitDepth) -> SrgbImage {
    let data = match depth {
        BitDepth::Eight => {
            let t = eight_bit_thresholds();
            img.data().iter().map(|x| t.partition_point(|t| t <= x) as u16).collect()
        }
        BitDepth::Sixteen => img.data().iter().map(|&x| quantize(x, depth)).collect(),
    };
    SrgbImage {
        width: img.width(),
        height: img.height(),
        depth,
        data,
    }
}

fn quantize(x: f32, depth: BitDepth) -> u16 {
    (srgb_encode(x as f64) * depth.max_value() as f64).round() as u16
}

/// `t[k-1]` is the smallest f32 that quantizes to 8-bit code `k` or above.
/// The quantizer is monotone, so counting thresholds at or below `x` gives
/// exactly `quantize(x)` without a `powf` per sample.
fn eight_bit_thresholds() -> &'static [f32; 255] {
    static T: std::sync::OnceLock<[f32; 255]> = std::sync::OnceLock::new();
    T.get_or_init(|| {
        std::array::from_fn(|i| {
            let code = i as u16 + 1;
            // Non-negative floats order like their bit patterns.
            let (mut lo, mut hi) = (0u32, 1f32.to_bits());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if quantize(f32::from_bits(mid), BitDepth::Eight) >= code {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            f32::from_bits(lo)
        })
    })
}

pub fn srgb_to_linear(img: &SrgbImage) -> LinearImage {
    let max = img.depth.max_value() as f64;
    let data = img
        .data
        .iter()
        .map(|&q| srgb_decode(q as f64 / max) as f32)
        .collect();
    LinearImage::new(img.width, img.height, data).expect("decoded sRGB raster is well formed")
}
