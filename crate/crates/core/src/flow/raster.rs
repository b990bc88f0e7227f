use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height and width of a raster grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize) -> Self {
        Dims { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Read access shared by every planar raster.
pub trait Raster {
    fn dims(&self) -> Dims;
    fn channels(&self) -> usize;
    fn values(&self) -> &[f64];
}

fn check_unit_range(what: &str, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        Some(i) => Err(Error::OutOfRange(format!(
            "{what} value {} at index {i} is not a finite value in [0, 1]",
            data[i]
        ))),
        None => Ok(()),
    }
}

/// Channel-planar image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    dims: Dims,
    data: Vec<f64>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::DimensionMismatch("image needs at least one channel".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(
                "image data length",
                data.len(),
                channels * height * width,
            ));
        }
        check_unit_range("image", &data)?;
        Ok(Image {
            channels,
            dims: Dims::new(height, width),
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image {
            channels,
            dims: Dims::new(height, width),
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Image::new(channels, height, width, vec![value; channels * height * width])
    }

    /// Builds an image from `f(channel, y, x)`; values are clamped into `[0, 1]`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("image value {v}")));
        }
        Ok(Image::from_clamped(channels, Dims::new(height, width), data))
    }

    /// Clamps `data` into `[0, 1]`. Callers guarantee finiteness and length.
    pub(crate) fn from_clamped(channels: usize, dims: Dims, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * dims.len());
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Image {
            channels,
            dims,
            data,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.dims.height + y) * self.dims.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.dims.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Returns channel `c` as a mask.
    pub fn channel_mask(&self, c: usize) -> Mask {
        Mask {
            dims: self.dims,
            data: self.plane(c).to_vec(),
        }
    }

    /// Multiplies every channel by a per-pixel factor in `[0, 1]`.
    pub fn multiply_mask(&self, mask: &Mask) -> Result<Image> {
        if mask.dims() != self.dims {
            return Err(Error::shape("image vs mask", self.dims, mask.dims()));
        }
        let n = self.dims.len();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v * mask.data[i % n])
            .collect();
        Ok(Image::from_clamped(self.channels, self.dims, data))
    }
}

impl Raster for Image {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Single-channel raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    dims: Dims,
    data: Vec<f64>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape("mask data length", data.len(), height * width));
        }
        check_unit_range("mask", &data)?;
        Ok(Mask {
            dims: Dims::new(height, width),
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Mask {
            dims: Dims::new(height, width),
            data: vec![0.0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Mask {
            dims: Dims::new(height, width),
            data: vec![1.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Mask::new(height, width, data)
    }

    pub(crate) fn from_clamped(dims: Dims, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Mask { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.dims.width + x]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_image(&self) -> Image {
        Image {
            channels: 1,
            dims: self.dims,
            data: self.data.clone(),
        }
    }

    /// 1 where the value exceeds `threshold`, 0 elsewhere.
    pub fn binarize(&self, threshold: f64) -> Mask {
        Mask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|&v| if v > threshold { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.data.iter().filter(|&&v| v > threshold).count()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Elementwise product, clamped into `[0, 1]`.
    pub fn multiply(&self, other: &Mask) -> Result<Mask> {
        if self.dims != other.dims {
            return Err(Error::shape("mask product", self.dims, other.dims));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Mask::from_clamped(self.dims, data))
    }

    /// `1 - self`.
    pub fn complement(&self) -> Mask {
        Mask {
            dims: self.dims,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }
}

impl Raster for Mask {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn channels(&self) -> usize {
        1
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Per-pixel backward displacement `(dx, dy)` in pixels.
///
/// Output pixel `p` samples the source at `p + f(p)`. Values are stored
/// interleaved, `[dx0, dy0, dx1, dy1, ...]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    dims: Dims,
    data: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * height * width {
            return Err(Error::shape("flow data length", data.len(), 2 * height * width));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("flow entry {i} = {}", data[i])));
        }
        Ok(FlowField {
            dims: Dims::new(height, width),
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            dims: Dims::new(height, width),
            data: vec![0.0; 2 * height * width],
        }
    }

    pub fn constant(height: usize, width: usize, dx: f64, dy: f64) -> Result<Self> {
        FlowField::from_fn(height, width, |_, _| (dx, dy))
    }

    /// Builds a field from `f(y, x) -> (dx, dy)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Result<Self> {
        let mut data = Vec::with_capacity(2 * height * width);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = f(y, x);
                data.push(dx);
                data.push(dy);
            }
        }
        FlowField::new(height, width, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    /// `(dx, dy)` at pixel `(y, x)`.
    pub fn get(&self, y: usize, x: usize) -> (f64, f64) {
        let i = 2 * (y * self.dims.width + x);
        (self.data[i], self.data[i + 1])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Mean displacement magnitude over all pixels.
    pub fn mean_magnitude(&self) -> f64 {
        if self.dims.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .data
            .chunks_exact(2)
            .map(|d| d[0].hypot(d[1]))
            .sum();
        total / self.dims.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

/// Tight bounding-box height and width of a binarized mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extents {
    pub h: usize,
    pub w: usize,
}
