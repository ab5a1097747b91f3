//! Dense float rasters and boolean masks.
//!
//! Samples are stored row-major with interleaved channels. Pixel values
//! nominally live in `[-1, 1]`. A pixel may be marked [`MISSING`], in which
//! case every one of its channels holds the sentinel.

use crate::error::{Error, Result};

/// Sentinel stored in every channel of a missing pixel.
pub const MISSING: f32 = f32::NAN;

/// Returns true when `v` is the missing-sample sentinel.
#[inline]
pub fn is_missing(v: f32) -> bool {
    v.is_nan()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    /// A zero-filled image.
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!((1..=4).contains(&channels), "channel count must be 1..=4");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// An image where every pixel is missing.
    pub fn missing(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, MISSING)
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !(1..=4).contains(&channels) {
            return Err(Error::Channels(channels));
        }
        if data.len() != width * height * channels {
            return Err(Error::Size(format!(
                "{} samples for a {}x{}x{} image",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// One row as a flat interleaved slice.
    pub fn row(&self, y: usize) -> &[f32] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    #[inline]
    pub fn is_missing(&self, x: usize, y: usize) -> bool {
        is_missing(self.data[(y * self.width + x) * self.channels])
    }

    pub fn set_missing(&mut self, x: usize, y: usize) {
        self.pixel_mut(x, y).fill(MISSING);
    }

    pub fn has_missing(&self) -> bool {
        self.data.iter().any(|v| is_missing(*v))
    }

    /// Mask of defined (non-missing) pixels.
    pub fn defined_mask(&self) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| !self.is_missing(x, y))
    }

    /// Replaces missing pixels with `value` in every channel.
    pub fn fill_missing(&mut self, value: f32) {
        for v in &mut self.data {
            if is_missing(*v) {
                *v = value;
            }
        }
    }

    /// Marks every pixel outside `mask` as missing.
    pub fn apply_mask(&mut self, mask: &Mask) {
        assert_eq!(mask.dims(), self.dims());
        for y in 0..self.height {
            for x in 0..self.width {
                if !mask.get(x, y) {
                    self.set_missing(x, y);
                }
            }
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Size(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Elementwise `self - other`. Shapes must match.
    pub fn sub(&self, other: &Image) -> Image {
        assert!(self.same_shape(other));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Image { data, ..*self }
    }

    /// Elementwise `self + other`. Shapes must match.
    pub fn add(&self, other: &Image) -> Image {
        assert!(self.same_shape(other));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Image { data, ..*self }
    }

    pub fn scale(&self, s: f32) -> Image {
        let data = self.data.iter().map(|a| a * s).collect();
        Image { data, ..*self }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        let data = self.data.iter().map(|a| f(*a)).collect();
        Image { data, ..*self }
    }

    /// Largest absolute sample difference, ignoring samples missing in either image.
    pub fn max_abs_diff(&self, other: &Image) -> f32 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| !is_missing(**a) && !is_missing(**b))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// The image with rows and columns swapped.
    pub fn transposed(&self) -> Image {
        Image::from_fn(self.height, self.width, self.channels, |x, y, c| self.get(y, x, c))
    }
}

/// Boolean raster, true where a sample is defined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Size(format!(
                "{} mask entries for {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|b| *b)
    }

    pub fn all(&self) -> bool {
        self.data.iter().all(|b| *b)
    }
}
