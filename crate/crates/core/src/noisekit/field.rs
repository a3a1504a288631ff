use super::NoiseError;
use crate::radiometry::LinearImage;

/// Interleaved `height × width × channels` field of f64 values. Serves as
/// both noise map and latent.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl NoiseField {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, NoiseError> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(NoiseError::InvalidParams(format!(
                "field dimensions {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(NoiseError::InvalidParams(format!(
                "{} values for a {width}x{height}x{channels} field",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NoiseError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self, NoiseError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn zeros_like(&self) -> Self {
        self.with_data(vec![0.0; self.data.len()])
    }

    fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    pub fn from_image(img: &LinearImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data: img.data().iter().map(|v| *v as f64).collect(),
        }
    }

    pub fn to_image(&self) -> Result<LinearImage, NoiseError> {
        if self.channels != 3 {
            return Err(NoiseError::ShapeMismatch {
                expected: (self.width, self.height, 3),
                got: self.shape(),
            });
        }
        LinearImage::new(self.width, self.height, self.data.iter().map(|v| *v as f32).collect())
            .map_err(|e| NoiseError::InvalidParams(e.to_string()))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn check_shape(&self, expected: (usize, usize, usize)) -> Result<(), NoiseError> {
        if self.shape() != expected {
            return Err(NoiseError::ShapeMismatch {
                expected,
                got: self.shape(),
            });
        }
        Ok(())
    }

    /// Channel-wise concatenation `self ⊕ other`.
    pub fn concat_channels(&self, other: &NoiseField) -> Result<NoiseField, NoiseError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(NoiseError::ShapeMismatch {
                expected: (self.width, self.height, other.channels),
                got: other.shape(),
            });
        }
        let c = self.channels + other.channels;
        let mut data = Vec::with_capacity(self.width * self.height * c);
        for (a, b) in self.data.chunks_exact(self.channels).zip(other.data.chunks_exact(other.channels)) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(NoiseField {
            width: self.width,
            height: self.height,
            channels: c,
            data,
        })
    }

    /// Elementwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &NoiseField, b: f64) -> Result<NoiseField, NoiseError> {
        other.check_shape(self.shape())?;
        Ok(self.with_data(self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_data(self.data.iter().map(|v| f(*v)).collect())
    }

    pub fn squared_distance(&self, other: &NoiseField) -> Result<f64, NoiseError> {
        other.check_shape(self.shape())?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| (x - y) * (x - y)).sum())
    }
}
