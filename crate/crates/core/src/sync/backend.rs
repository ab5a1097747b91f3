//! Denoiser and autoencoder interfaces plus in-process stand-ins.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::latent::LatentTensor;
use crate::error::{Error, Result};
use crate::image::Image;

/// Velocity field of a rectified flow, `t = 0` noise and `t = 1` data.
pub trait Denoiser: Send + Sync {
    fn velocity(&self, z: &LatentTensor, t: f32, prompt_id: &str) -> Result<LatentTensor>;

    /// True when calls must not overlap.
    fn is_serial(&self) -> bool {
        false
    }
}

/// Maps between images and latents.
pub trait Vae: Send + Sync {
    fn encode(&self, x: &Image) -> Result<LatentTensor>;
    fn decode(&self, z: &LatentTensor) -> Result<Image>;
    /// Image pixels per latent pixel along each axis.
    fn scale_factor(&self) -> usize;
    fn latent_channels(&self) -> usize;

    fn is_serial(&self) -> bool {
        false
    }
}

/// Velocity `cfg_velocity` would combine for `prompt` against `negative`.
pub fn guided_velocity(
    denoiser: &dyn Denoiser,
    z: &LatentTensor,
    t: f32,
    prompt: &str,
    negative: &str,
    scale: f32,
) -> Result<LatentTensor> {
    let cond = denoiser.velocity(z, t, prompt)?;
    if scale == 0.0 {
        return Ok(cond);
    }
    let uncond = denoiser.velocity(z, t, negative)?;
    super::cfg_velocity(&cond, &uncond, scale)
}

/// Latents are the image itself.
#[derive(Clone, Copy, Debug)]
pub struct IdentityVae {
    pub channels: usize,
}

impl Vae for IdentityVae {
    fn encode(&self, x: &Image) -> Result<LatentTensor> {
        Ok(LatentTensor::from_image(x))
    }

    fn decode(&self, z: &LatentTensor) -> Result<Image> {
        z.to_image()
    }

    fn scale_factor(&self) -> usize {
        1
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }
}

/// Mean over `k × k` blocks (partial blocks at the far edges).
fn box_down(x: &Image, k: usize) -> Image {
    let (w, h) = x.dims();
    let (lw, lh) = (w.div_ceil(k), h.div_ceil(k));
    Image::from_fn(lw, lh, x.channels(), |i, j, c| {
        let mut sum = 0.0f32;
        let mut n = 0;
        for y in j * k..((j + 1) * k).min(h) {
            for xx in i * k..((i + 1) * k).min(w) {
                sum += x.get(xx, y, c);
                n += 1;
            }
        }
        sum / n as f32
    })
}

fn replicate_up(x: &Image, k: usize, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, x.channels(), |i, j, c| x.get(i / k, j / k, c))
}

/// Same-resolution latents whose encoder discards detail finer than `k`
/// pixels, so decode∘encode is not the identity.
#[derive(Clone, Copy, Debug)]
pub struct LossyVae {
    pub k: usize,
    pub channels: usize,
}

impl Vae for LossyVae {
    fn encode(&self, x: &Image) -> Result<LatentTensor> {
        let (w, h) = x.dims();
        Ok(LatentTensor::from_image(&replicate_up(&box_down(x, self.k), self.k, w, h)))
    }

    fn decode(&self, z: &LatentTensor) -> Result<Image> {
        z.to_image()
    }

    fn scale_factor(&self) -> usize {
        1
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }
}

/// Latents at `1/factor` resolution: block means down, replication up.
#[derive(Clone, Copy, Debug)]
pub struct PoolVae {
    pub factor: usize,
    pub channels: usize,
}

impl Vae for PoolVae {
    fn encode(&self, x: &Image) -> Result<LatentTensor> {
        let (w, h) = x.dims();
        if w % self.factor != 0 || h % self.factor != 0 {
            return Err(Error::Size(format!(
                "{w}x{h} image is not a multiple of {}",
                self.factor
            )));
        }
        Ok(LatentTensor::from_image(&box_down(x, self.factor)).with_scale_factor(self.factor))
    }

    fn decode(&self, z: &LatentTensor) -> Result<Image> {
        let k = self.factor;
        Ok(replicate_up(&z.to_image()?, k, z.width() * k, z.height() * k))
    }

    fn scale_factor(&self) -> usize {
        self.factor
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }
}

/// Straight-line flow toward a fixed latent per prompt: `(A - z) / (1 - t)`.
#[derive(Clone, Debug, Default)]
pub struct TargetDenoiser {
    targets: HashMap<String, LatentTensor>,
}

/// Latest time the target denoiser divides by.
pub const TARGET_T_MAX: f32 = 0.999;

impl TargetDenoiser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_target(mut self, prompt_id: &str, target: LatentTensor) -> Self {
        self.targets.insert(prompt_id.to_string(), target);
        self
    }

    pub fn insert(&mut self, prompt_id: &str, target: LatentTensor) {
        self.targets.insert(prompt_id.to_string(), target);
    }
}

impl Denoiser for TargetDenoiser {
    fn velocity(&self, z: &LatentTensor, t: f32, prompt_id: &str) -> Result<LatentTensor> {
        let scale = 1.0 / (1.0 - t.min(TARGET_T_MAX));
        match self.targets.get(prompt_id) {
            Some(a) => a.zip_with(z, |a, z| (a - z) * scale),
            // the empty prompt pulls toward zero
            None if prompt_id.is_empty() => Ok(z.map(|z| -z * scale)),
            None => Err(Error::Backend(format!("unknown prompt `{prompt_id}`"))),
        }
    }
}

/// Flow toward a 3×3 box-blurred copy of the current latent.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlurDenoiser;

impl Denoiser for BlurDenoiser {
    fn velocity(&self, z: &LatentTensor, t: f32, _prompt_id: &str) -> Result<LatentTensor> {
        let [c, h, w] = z.shape();
        let scale = 1.0 / (1.0 - t.min(TARGET_T_MAX));
        let mut out = z.clone();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut sum = 0.0;
                    for dy in [-1isize, 0, 1] {
                        for dx in [-1isize, 0, 1] {
                            let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                            let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                            sum += z.get(ch, yy, xx);
                        }
                    }
                    out.data_mut()[(ch * h + y) * w + x] = (sum / 9.0 - z.get(ch, y, x)) * scale;
                }
            }
        }
        Ok(out)
    }
}

/// A deterministic but irregular field: velocity toward uniform noise
/// keyed by seed, time and prompt.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoiseDenoiser {
    pub seed: u64,
}

impl Denoiser for NoiseDenoiser {
    fn velocity(&self, z: &LatentTensor, t: f32, prompt_id: &str) -> Result<LatentTensor> {
        let prompt_key = prompt_id
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ prompt_key ^ ((t.to_bits() as u64) << 17));
        Ok(z.map(|v| rng.random_range(-1.0f32..1.0) - 0.5 * v))
    }
}
