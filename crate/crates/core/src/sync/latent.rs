//! Planar latent tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// A `channels × height × width` tensor stored channel-planar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentTensor {
    channels: usize,
    height: usize,
    width: usize,
    /// Image pixels per latent pixel along each axis.
    scale_factor: usize,
    data: Vec<f32>,
}

impl LatentTensor {
    pub fn zeros(channels: usize, height: usize, width: usize, scale_factor: usize) -> Self {
        Self {
            channels,
            height,
            width,
            scale_factor,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(
        channels: usize,
        height: usize,
        width: usize,
        scale_factor: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Size(format!(
                "{} samples for a {channels}x{height}x{width} latent",
                data.len()
            )));
        }
        if scale_factor == 0 {
            return Err(Error::Size("scale factor must be positive".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            scale_factor,
            data,
        })
    }

    /// Planar copy of an image (scale factor 1).
    pub fn from_image(img: &Image) -> Self {
        let (w, h) = img.dims();
        let c = img.channels();
        let mut data = vec![0.0; c * h * w];
        for (i, px) in img.data().chunks_exact(c).enumerate() {
            for (ch, v) in px.iter().enumerate() {
                data[ch * h * w + i] = *v;
            }
        }
        Self {
            channels: c,
            height: h,
            width: w,
            scale_factor: 1,
            data,
        }
    }

    /// Interleaved view of channels `range` as an image.
    pub fn channels_to_image(&self, start: usize, count: usize) -> Result<Image> {
        let (h, w) = (self.height, self.width);
        let mut data = Vec::with_capacity(count * h * w);
        for i in 0..h * w {
            for ch in start..start + count {
                data.push(self.data[ch * h * w + i]);
            }
        }
        Image::from_vec(w, h, count, data)
    }

    /// The whole tensor as an image; needs at most four channels.
    pub fn to_image(&self) -> Result<Image> {
        self.channels_to_image(0, self.channels)
    }

    /// Splits into images of at most four channels each.
    pub fn to_image_chunks(&self) -> Vec<Image> {
        (0..self.channels)
            .step_by(4)
            .map(|s| {
                self.channels_to_image(s, (self.channels - s).min(4))
                    .expect("chunk has 1..=4 channels")
            })
            .collect()
    }

    /// Inverse of [`Self::to_image_chunks`].
    pub fn from_image_chunks(chunks: &[Image], scale_factor: usize) -> Result<Self> {
        let first = chunks
            .first()
            .ok_or_else(|| Error::Size("no channels".into()))?;
        let (w, h) = first.dims();
        let channels = chunks.iter().map(Image::channels).sum();
        let mut data = Vec::with_capacity(channels * h * w);
        for img in chunks {
            if img.dims() != (w, h) {
                return Err(Error::Size("chunk sizes differ".into()));
            }
            let single = Self::from_image(img);
            data.extend_from_slice(&single.data);
        }
        Self::from_vec(channels, h, w, scale_factor, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `[channels, height, width]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn scale_factor(&self) -> usize {
        self.scale_factor
    }

    pub fn with_scale_factor(mut self, scale_factor: usize) -> Self {
        self.scale_factor = scale_factor;
        self
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

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::Size(format!(
                "latent shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Elementwise combination `f(self, other)`; shapes must match.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        self.check_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self {
            data,
            ..self.clone_meta()
        })
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self {
            data: self.data.iter().map(|v| f(*v)).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            channels: self.channels,
            height: self.height,
            width: self.width,
            scale_factor: self.scale_factor,
            data: Vec::new(),
        }
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
