//! Masked blending of Laplacian pyramids and latent-resolution images.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::pyramid::{Pyramid, PyramidKind};
use crate::warp::MaskedPyramid;

pub const DEFAULT_ALPHA: f32 = 0.375;

/// Weight of a defined sample that touches an undefined 4-neighbour.
pub const FEATHER_WEIGHT: f32 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendOptions {
    /// 0 gives the plain mean, 1 the value-weighted mean.
    pub alpha: f32,
    /// Down-weight samples on the rim of each mask.
    pub feather: bool,
}

impl Default for BlendOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            feather: true,
        }
    }
}

impl BlendOptions {
    pub fn with_alpha(alpha: f32) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

/// Value-weighted average `Σ|x|x / Σ|x|`, or 0 when every value is 0.
pub fn vavg(values: &[f32]) -> f32 {
    let (num, den) = values
        .iter()
        .fold((0.0f32, 0.0f32), |(n, d), &x| (n + x.abs() * x, d + x.abs()));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Weighted interpolation between the mean and the value-weighted mean.
///
/// `samples` are `(value, weight)` pairs with positive weights. They are
/// sorted in place first so the result does not depend on input order.
pub fn blend_samples(samples: &mut [(f32, f32)], alpha: f32) -> f32 {
    samples.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut wsum = 0.0f32;
    let mut mean = 0.0f32;
    let mut vnum = 0.0f32;
    let mut vden = 0.0f32;
    for &(x, w) in samples.iter() {
        wsum += w;
        mean += w * x;
        vnum += w * x.abs() * x;
        vden += w * x.abs();
    }
    let avg = mean / wsum;
    let v = if vden == 0.0 { 0.0 } else { vnum / vden };
    avg + alpha * (v - avg)
}

fn on_rim(mask: &Mask, x: usize, y: usize) -> bool {
    let (w, h) = mask.dims();
    (x > 0 && !mask.get(x - 1, y))
        || (x + 1 < w && !mask.get(x + 1, y))
        || (y > 0 && !mask.get(x, y - 1))
        || (y + 1 < h && !mask.get(x, y + 1))
}

fn feather_weights(mask: &Mask, feather: bool) -> Vec<f32> {
    let (w, h) = mask.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                out[y * w + x] = if feather && on_rim(mask, x, y) {
                    FEATHER_WEIGHT
                } else {
                    1.0
                };
            }
        }
    }
    out
}

/// Blends masked Laplacian pyramids into one fully defined pyramid.
///
/// Detail samples that no input defines become 0. The coarsest level must
/// be covered everywhere.
pub fn blend_pyramids(pyrs: &[MaskedPyramid], opts: BlendOptions) -> Result<Pyramid> {
    let first = pyrs
        .first()
        .ok_or_else(|| Error::Size("nothing to blend".into()))?;
    let depth = first.depth();
    for p in &pyrs[1..] {
        if p.depth() != depth
            || p.channels() != first.channels()
            || p.base_dims() != first.base_dims()
        {
            return Err(Error::Size(format!(
                "pyramid {:?}x{} depth {} vs {:?}x{} depth {}",
                p.base_dims(),
                p.channels(),
                p.depth(),
                first.base_dims(),
                first.channels(),
                depth
            )));
        }
    }

    let c = first.channels();
    let mut levels = Vec::with_capacity(depth);
    for l in 0..depth {
        let (w, h) = first.level(l).dims();
        let weights: Vec<Vec<f32>> = pyrs
            .iter()
            .map(|p| feather_weights(p.mask(l), opts.feather))
            .collect();
        let coarsest = l + 1 == depth;
        if coarsest {
            for y in 0..h {
                for x in 0..w {
                    if weights.iter().all(|wt| wt[y * w + x] == 0.0) {
                        return Err(Error::Coverage { level: l, x, y });
                    }
                }
            }
        }
        let mut out = vec![0.0f32; w * h * c];
        out.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
            let mut samples = Vec::with_capacity(pyrs.len());
            for x in 0..w {
                for ch in 0..c {
                    samples.clear();
                    for (p, wt) in pyrs.iter().zip(&weights) {
                        let wgt = wt[y * w + x];
                        if wgt > 0.0 {
                            samples.push((p.level(l).get(x, y, ch), wgt));
                        }
                    }
                    if !samples.is_empty() {
                        row[x * c + ch] = blend_samples(&mut samples, opts.alpha);
                    }
                }
            }
        });
        levels.push(Image::from_vec(w, h, c, out)?);
    }
    Pyramid::from_levels(PyramidKind::Laplacian, levels)
}

/// Per-pixel mean over the defined samples of each input; 0 where none is.
pub fn blend_images(imgs: &[Image]) -> Result<Image> {
    let first = imgs
        .first()
        .ok_or_else(|| Error::Size("nothing to blend".into()))?;
    for img in &imgs[1..] {
        first.check_same_shape(img)?;
    }
    let (w, h) = first.dims();
    let c = first.channels();
    Ok(Image::from_fn(w, h, c, |x, y, ch| {
        let mut sum = 0.0f32;
        let mut n = 0u32;
        for img in imgs {
            if !img.is_missing(x, y) {
                sum += img.get(x, y, ch);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f32
        }
    }))
}
