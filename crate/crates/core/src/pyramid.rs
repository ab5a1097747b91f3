//! Gaussian and Laplacian pyramids.
//!
//! Levels are pixel-center aligned: pixel `i` of level `l` covers canonical
//! pixels `[i * 2^l, (i + 1) * 2^l)` and its center sits at canonical
//! coordinate `(i + 0.5) * 2^l - 0.5`. Level sizes use ceiling division.
//!
//! The upsampler is bilinear 2x magnification on that grid, and the
//! decimator is its transpose normalized to unit gain. Away from the edges
//! that is the binomial kernel `[1, 3, 3, 1] / 8` over parent pixels
//! `2i - 1 ..= 2i + 2`; at the edges (odd sizes included) the weights follow
//! the upsampler's clamping. Because the decimator is the hit-count-normalized
//! adjoint of the upsampler, inverse warping an identity view recovers a
//! plain Laplacian decomposition.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

/// Separable, symmetric, normalized filter taps.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    taps: Vec<f32>,
}

impl Kernel {
    pub fn new(taps: Vec<f32>) -> Result<Self> {
        let sum: f64 = taps.iter().map(|t| *t as f64).sum();
        let symmetric = taps.iter().zip(taps.iter().rev()).all(|(a, b)| a == b);
        if taps.is_empty() || !symmetric || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("invalid kernel taps {taps:?}")));
        }
        Ok(Self { taps })
    }

    /// The decimation kernel used by every pyramid in this crate.
    pub fn binomial() -> Self {
        Self {
            taps: BLUR_TAPS.to_vec(),
        }
    }

    pub fn taps(&self) -> &[f32] {
        &self.taps
    }
}

/// `[1, 3, 3, 1] / 8`, the interior weights over parent pixels `2i - 1 ..= 2i + 2`.
const BLUR_TAPS: [f32; 4] = [0.125, 0.375, 0.375, 0.125];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PyramidKind {
    Gaussian,
    Laplacian,
}

impl PyramidKind {
    pub fn name(self) -> &'static str {
        match self {
            PyramidKind::Gaussian => "gaussian",
            PyramidKind::Laplacian => "laplacian",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pyramid {
    kind: PyramidKind,
    levels: Vec<Image>,
}

impl Pyramid {
    /// Wraps existing levels, checking the halving rule.
    pub fn from_levels(kind: PyramidKind, levels: Vec<Image>) -> Result<Self> {
        check_level_dims(&levels)?;
        Ok(Self { kind, levels })
    }

    pub fn kind(&self) -> PyramidKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [Image] {
        &mut self.levels
    }

    pub fn level(&self, l: usize) -> &Image {
        &self.levels[l]
    }

    pub fn into_levels(self) -> Vec<Image> {
        self.levels
    }

    pub fn base_dims(&self) -> (usize, usize) {
        self.levels[0].dims()
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels()
    }

    fn expect_kind(&self, kind: PyramidKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Kind {
                expected: kind.name(),
                actual: self.kind.name(),
            })
        }
    }
}

pub(crate) fn check_level_dims(levels: &[Image]) -> Result<()> {
    let Some(base) = levels.first() else {
        return Err(Error::Size("pyramid has no levels".into()));
    };
    for (l, level) in levels.iter().enumerate() {
        let want = level_dims(base.width(), base.height(), l);
        if level.dims() != want || level.channels() != base.channels() {
            return Err(Error::Size(format!(
                "level {l} is {}x{}x{}, expected {}x{}x{}",
                level.width(),
                level.height(),
                level.channels(),
                want.0,
                want.1,
                base.channels()
            )));
        }
    }
    Ok(())
}

/// Dimensions of level `l` for a `width` x `height` base.
pub fn level_dims(width: usize, height: usize, level: usize) -> (usize, usize) {
    let s = 1usize << level;
    (width.div_ceil(s), height.div_ceil(s))
}

/// Largest valid depth for a `width` x `height` image.
pub fn max_depth(width: usize, height: usize) -> usize {
    let m = width.min(height);
    if m == 0 {
        0
    } else {
        m.ilog2() as usize + 1
    }
}

/// Depth whose coarsest level is about 32 pixels (6 for a 1024 square).
pub fn default_depth(width: usize, height: usize) -> usize {
    let m = width.min(height).max(1);
    (m.ilog2() as usize).saturating_sub(4).clamp(1, max_depth(width, height).max(1))
}

pub(crate) fn check_depth(width: usize, height: usize, depth: usize) -> Result<()> {
    let max = max_depth(width, height);
    if depth == 0 || depth > max {
        return Err(Error::Depth {
            depth,
            max,
            width,
            height,
        });
    }
    Ok(())
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Blurs with the binomial kernel and halves the resolution (ceiling).
pub fn downsample_blur(img: &Image) -> Result<Image> {
    let (w, h) = img.dims();
    if w.min(h) < 2 {
        return Err(Error::Size(format!("cannot downsample a {w}x{h} image")));
    }
    Ok(decimate(img))
}

/// Per decimated sample along one axis of length `n`: parent indices and
/// weights of the upsampler's transpose, normalized to sum to one.
fn decimation_taps(n: usize) -> Vec<Vec<(usize, f32)>> {
    let m = n.div_ceil(2);
    let mut taps: Vec<Vec<(usize, f32)>> = vec![Vec::with_capacity(4); m];
    for x in 0..n {
        let (i0, i1, f) = up_taps(x, m);
        taps[i0].push((x, 1.0 - f));
        taps[i1].push((x, f));
    }
    for t in &mut taps {
        let total: f32 = t.iter().map(|p| p.1).sum();
        for p in t.iter_mut() {
            p.1 /= total;
        }
    }
    taps
}

/// Decimation without the size precondition; 1-pixel axes stay 1 pixel.
fn decimate(img: &Image) -> Image {
    let (w, h) = img.dims();
    let c = img.channels();
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let (xt, yt) = (decimation_taps(w), decimation_taps(h));

    // horizontal pass: w -> ow
    let mut tmp = vec![0.0f32; ow * h * c];
    tmp.par_chunks_mut(ow * c).enumerate().for_each(|(y, out)| {
        let row = img.row(y);
        for (i, taps) in xt.iter().enumerate() {
            for ch in 0..c {
                out[i * c + ch] = taps.iter().map(|&(x, wt)| wt * row[x * c + ch]).sum();
            }
        }
    });

    // vertical pass: h -> oh
    let stride = ow * c;
    let mut out = vec![0.0f32; ow * oh * c];
    out.par_chunks_mut(stride).enumerate().for_each(|(j, dst)| {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = yt[j].iter().map(|&(y, wt)| wt * tmp[y * stride + i]).sum();
        }
    });
    Image::from_vec(ow, oh, c, out).expect("decimated shape")
}

/// Bilinear sampling positions for upsampling `n_src` samples to `n_dst`.
///
/// Destination pixel `x` reads source coordinate `(x + 0.5) / 2 - 0.5`.
#[inline]
fn up_taps(x: usize, n_src: usize) -> (usize, usize, f32) {
    let s = (x as f32 + 0.5) * 0.5 - 0.5;
    let f = s.floor();
    let frac = s - f;
    let i0 = clamp_index(f as isize, n_src);
    let i1 = clamp_index(f as isize + 1, n_src);
    (i0, i1, frac)
}

/// Bilinear 2x magnification.
pub fn upsample(img: &Image) -> Image {
    upsample_to(img, img.width() * 2, img.height() * 2)
}

/// Bilinear magnification onto a `width` x `height` parent grid.
///
/// The parent size is recorded rather than derived, so odd parents are
/// reproduced exactly.
pub fn upsample_to(img: &Image, width: usize, height: usize) -> Image {
    let (w, h) = img.dims();
    let c = img.channels();

    let xt: Vec<_> = (0..width).map(|x| up_taps(x, w)).collect();
    let mut tmp = vec![0.0f32; width * h * c];
    tmp.par_chunks_mut(width * c).enumerate().for_each(|(y, out)| {
        let row = img.row(y);
        for (x, &(i0, i1, f)) in xt.iter().enumerate() {
            for ch in 0..c {
                out[x * c + ch] = (1.0 - f) * row[i0 * c + ch] + f * row[i1 * c + ch];
            }
        }
    });

    let stride = width * c;
    let mut out = vec![0.0f32; width * height * c];
    out.par_chunks_mut(stride).enumerate().for_each(|(y, dst)| {
        let (j0, j1, f) = up_taps(y, h);
        let (r0, r1) = (&tmp[j0 * stride..(j0 + 1) * stride], &tmp[j1 * stride..(j1 + 1) * stride]);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = (1.0 - f) * r0[i] + f * r1[i];
        }
    });
    Image::from_vec(width, height, c, out).expect("upsampled shape")
}

/// Transpose of [`upsample_to`]: scatters a `width` x `height` parent image
/// back onto a `child_w` x `child_h` grid with the bilinear weights.
pub fn upsample_adjoint(img: &Image, child_w: usize, child_h: usize) -> Image {
    let (w, h) = img.dims();
    let c = img.channels();

    // adjoint of the vertical pass: h -> child_h
    let stride = w * c;
    let mut tmp = vec![0.0f32; stride * child_h];
    for y in 0..h {
        let (j0, j1, f) = up_taps(y, child_h);
        let src = img.row(y);
        for (i, v) in src.iter().enumerate() {
            tmp[j0 * stride + i] += (1.0 - f) * v;
            tmp[j1 * stride + i] += f * v;
        }
    }

    // adjoint of the horizontal pass: w -> child_w
    let mut out = vec![0.0f32; child_w * child_h * c];
    out.par_chunks_mut(child_w * c).enumerate().for_each(|(y, dst)| {
        let src = &tmp[y * stride..(y + 1) * stride];
        for x in 0..w {
            let (i0, i1, f) = up_taps(x, child_w);
            for ch in 0..c {
                let v = src[x * c + ch];
                dst[i0 * c + ch] += (1.0 - f) * v;
                dst[i1 * c + ch] += f * v;
            }
        }
    });
    Image::from_vec(child_w, child_h, c, out).expect("adjoint shape")
}

fn check_input(img: &Image, depth: usize) -> Result<()> {
    check_depth(img.width(), img.height(), depth)?;
    if img.has_missing() {
        return Err(Error::MissingData);
    }
    Ok(())
}

pub fn build_gaussian(img: &Image, depth: usize) -> Result<Pyramid> {
    check_input(img, depth)?;
    let mut levels = Vec::with_capacity(depth);
    levels.push(img.clone());
    for l in 1..depth {
        let next = decimate(&levels[l - 1]);
        levels.push(next);
    }
    Ok(Pyramid {
        kind: PyramidKind::Gaussian,
        levels,
    })
}

pub fn build_laplacian(img: &Image, depth: usize) -> Result<Pyramid> {
    let gauss = build_gaussian(img, depth)?;
    Ok(gaussian_to_laplacian(&gauss))
}

/// `L_l = G_l - U(G_{l+1})`, last level copied.
pub(crate) fn gaussian_to_laplacian(gauss: &Pyramid) -> Pyramid {
    let g = &gauss.levels;
    let mut levels = Vec::with_capacity(g.len());
    for l in 0..g.len() {
        if l + 1 < g.len() {
            let up = upsample_to(&g[l + 1], g[l].width(), g[l].height());
            levels.push(g[l].sub(&up));
        } else {
            levels.push(g[l].clone());
        }
    }
    Pyramid {
        kind: PyramidKind::Laplacian,
        levels,
    }
}

/// Collapses a Laplacian pyramid back to a full-resolution image.
pub fn reconstruct(pyr: &Pyramid) -> Result<Image> {
    pyr.expect_kind(PyramidKind::Laplacian)?;
    if pyr.levels.iter().any(Image::has_missing) {
        return Err(Error::MissingData);
    }
    let mut acc = pyr.levels.last().expect("non-empty pyramid").clone();
    for level in pyr.levels.iter().rev().skip(1) {
        let up = upsample_to(&acc, level.width(), level.height());
        acc = level.add(&up);
    }
    Ok(acc)
}

/// Re-expresses a Laplacian pyramid as the Gaussian pyramid it encodes:
/// level `l` accumulates every coarser Laplacian level upsampled to `l`.
pub fn laplacian_to_gaussian(pyr: &Pyramid) -> Result<Pyramid> {
    pyr.expect_kind(PyramidKind::Laplacian)?;
    let n = pyr.levels.len();
    let mut levels = vec![pyr.levels[n - 1].clone()];
    for l in (0..n - 1).rev() {
        let lap = &pyr.levels[l];
        let up = upsample_to(levels.last().unwrap(), lap.width(), lap.height());
        levels.push(lap.add(&up));
    }
    levels.reverse();
    Ok(Pyramid {
        kind: PyramidKind::Gaussian,
        levels,
    })
}
