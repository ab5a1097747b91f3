//! Forward and inverse Laplacian warping.
//!
//! Forward warping renders a target view by sampling a Gaussian pyramid of
//! the canonical image at each pixel's level of detail. Inverse warping is
//! the hit-count-normalized adjoint of that sampling taken through the
//! Laplacian parameterization of the pyramid: target pixels are deposited at
//! their (level, canonical pixel) destination, deposits flow to every coarser
//! level through the transpose of the upsampler, and a Laplacian pyramid is
//! extracted from the result after nearest-neighbour imputation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Mask, MISSING};
use crate::pyramid::{
    check_depth, downsample_blur, level_dims, upsample_adjoint, upsample_to, Pyramid, PyramidKind,
};
use crate::uvmap::{LodMap, UvMap};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    #[default]
    Nearest,
    Trilinear,
}

impl SampleMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Trilinear => "trilinear",
        }
    }
}

impl std::str::FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "trilinear" => Ok(Self::Trilinear),
            other => Err(Error::Format(format!("unknown sample mode `{other}`"))),
        }
    }
}

/// A Laplacian pyramid whose samples may be undefined.
#[derive(Clone, Debug)]
pub struct MaskedPyramid {
    levels: Vec<Image>,
    masks: Vec<Mask>,
}

impl MaskedPyramid {
    /// Builds from levels whose missing pixels define the masks.
    pub fn from_levels(levels: Vec<Image>) -> Result<Self> {
        crate::pyramid::check_level_dims(&levels)?;
        let masks = levels.iter().map(Image::defined_mask).collect();
        Ok(Self { levels, masks })
    }

    /// A fully defined pyramid.
    pub fn from_pyramid(pyr: &Pyramid) -> Result<Self> {
        if pyr.kind() != PyramidKind::Laplacian {
            return Err(Error::Kind {
                expected: "laplacian",
                actual: pyr.kind().name(),
            });
        }
        Self::from_levels(pyr.levels().to_vec())
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &Image {
        &self.levels[l]
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn mask(&self, l: usize) -> &Mask {
        &self.masks[l]
    }

    pub fn base_dims(&self) -> (usize, usize) {
        self.levels[0].dims()
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels()
    }

    /// A viewable image: undefined detail becomes zero and the coarsest
    /// level is filled by nearest imputation before collapsing.
    pub fn preview(&self) -> Result<Image> {
        let n = self.levels.len();
        let mut levels = self.levels.clone();
        for level in &mut levels[..n - 1] {
            level.fill_missing(0.0);
        }
        levels[n - 1] = impute_nearest(&self.levels[n - 1], &self.masks[n - 1])?;
        crate::pyramid::reconstruct(&Pyramid::from_levels(PyramidKind::Laplacian, levels)?)
    }
}

#[inline]
fn round_half_up(v: f32) -> i64 {
    (v + 0.5).floor() as i64
}

/// Pyramid level a nearest-mode lookup reads for `lod`.
#[inline]
pub fn nearest_level(lod: f32, depth: usize) -> usize {
    round_half_up(lod).clamp(0, depth as i64 - 1) as usize
}

/// Nearest pixel index on an `n`-pixel level for normalized coordinate `u`.
#[inline]
pub fn nearest_index(u: f32, n: usize) -> usize {
    round_half_up(u * n as f32 - 0.5).clamp(0, n as i64 - 1) as usize
}

fn check_view(map: &UvMap, lod: &LodMap) -> Result<()> {
    if map.dims() != lod.dims() {
        return Err(Error::Size(format!(
            "uv map is {:?} but lod map is {:?}",
            map.dims(),
            lod.dims()
        )));
    }
    Ok(())
}

/// Target pixel → (level, x, y) destination in nearest mode.
#[inline]
fn nearest_target(
    map: &UvMap,
    lod: &LodMap,
    x: usize,
    y: usize,
    canonical: usize,
    depth: usize,
) -> Option<(usize, usize, usize)> {
    let (u, v) = map.get(x, y)?;
    let level = nearest_level(lod.get(x, y)?, depth);
    let (w, h) = level_dims(canonical, canonical, level);
    Some((level, nearest_index(u, w), nearest_index(v, h)))
}

fn bilinear(img: &Image, u: f32, v: f32, out: &mut [f32]) {
    let (w, h) = img.dims();
    let px = u * w as f32 - 0.5;
    let py = v * h as f32 - 0.5;
    let (fx0, fy0) = (px.floor(), py.floor());
    let (ax, ay) = (px - fx0, py - fy0);
    let cx = |i: f32| (i as i64).clamp(0, w as i64 - 1) as usize;
    let cy = |i: f32| (i as i64).clamp(0, h as i64 - 1) as usize;
    let (x0, x1, y0, y1) = (cx(fx0), cx(fx0 + 1.0), cy(fy0), cy(fy0 + 1.0));
    for (c, o) in out.iter_mut().enumerate() {
        let top = (1.0 - ax) * img.get(x0, y0, c) + ax * img.get(x1, y0, c);
        let bot = (1.0 - ax) * img.get(x0, y1, c) + ax * img.get(x1, y1, c);
        *o = (1.0 - ay) * top + ay * bot;
    }
}

/// Renders a target view by LOD-aware sampling of a Gaussian pyramid.
///
/// Invalid map pixels (and pixels without a defined LOD) come out missing.
pub fn forward_warp(pyr: &Pyramid, map: &UvMap, lod: &LodMap, mode: SampleMode) -> Result<Image> {
    if pyr.kind() != PyramidKind::Gaussian {
        return Err(Error::Kind {
            expected: "gaussian",
            actual: pyr.kind().name(),
        });
    }
    check_view(map, lod)?;
    let canonical = lod.canonical_size();
    if pyr.base_dims() != (canonical, canonical) {
        return Err(Error::Size(format!(
            "pyramid base {:?} does not match canonical size {canonical}",
            pyr.base_dims()
        )));
    }
    if pyr.levels().iter().any(Image::has_missing) {
        return Err(Error::MissingData);
    }

    let depth = pyr.depth();
    let c = pyr.channels();
    let (w, h) = map.dims();
    let mut out = vec![MISSING; w * h * c];
    out.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
        let mut lo = [0.0f32; 4];
        let mut hi = [0.0f32; 4];
        for x in 0..w {
            let (Some((u, v)), Some(l)) = (map.get(x, y), lod.get(x, y)) else {
                continue;
            };
            let dst = &mut row[x * c..(x + 1) * c];
            match mode {
                SampleMode::Nearest => {
                    let level = pyr.level(nearest_level(l, depth));
                    let (i, j) = (nearest_index(u, level.width()), nearest_index(v, level.height()));
                    dst.copy_from_slice(level.pixel(i, j));
                }
                SampleMode::Trilinear => {
                    let l = l.clamp(0.0, (depth - 1) as f32);
                    let l0 = l.floor() as usize;
                    let l1 = (l0 + 1).min(depth - 1);
                    let f = l - l0 as f32;
                    bilinear(pyr.level(l0), u, v, &mut lo[..c]);
                    bilinear(pyr.level(l1), u, v, &mut hi[..c]);
                    for ch in 0..c {
                        dst[ch] = (1.0 - f) * lo[ch] + f * hi[ch];
                    }
                }
            }
        }
    });
    Image::from_vec(w, h, c, out)
}

/// Accumulated deposits of a target image in a Laplacian-parameterized
/// pyramid, before normalization.
#[derive(Clone, Debug)]
pub struct Transport {
    /// Per level, the summed deposited values.
    pub sums: Vec<Image>,
    /// Per level, the matching homogeneous weight (hit count).
    pub weights: Vec<Image>,
}

impl Transport {
    pub fn depth(&self) -> usize {
        self.sums.len()
    }

    /// `sums / weights` per level; zero-weight samples are missing.
    pub fn normalized(&self) -> Vec<Image> {
        self.sums
            .iter()
            .zip(&self.weights)
            .map(|(s, wgt)| {
                let c = s.channels();
                Image::from_fn(s.width(), s.height(), c, |x, y, ch| {
                    let d = wgt.get(x, y, 0);
                    if d > 0.0 {
                        s.get(x, y, ch) / d
                    } else {
                        MISSING
                    }
                })
            })
            .collect()
    }
}

/// Adjoint of nearest-mode forward warping through the Laplacian
/// parameterization, applied to `target` and to an all-ones weight channel.
///
/// Missing target pixels deposit nothing. Accumulation runs in row-major
/// target order, so results do not depend on thread count.
pub fn transport(target: &Image, map: &UvMap, lod: &LodMap, depth: usize) -> Result<Transport> {
    check_view(map, lod)?;
    if target.dims() != map.dims() {
        return Err(Error::Size(format!(
            "image is {:?} but view is {:?}",
            target.dims(),
            map.dims()
        )));
    }
    let canonical = lod.canonical_size();
    check_depth(canonical, canonical, depth)?;

    let c = target.channels();
    let mut sums: Vec<Image> = (0..depth)
        .map(|l| {
            let (w, h) = level_dims(canonical, canonical, l);
            Image::new(w, h, c)
        })
        .collect();
    let mut weights: Vec<Image> = sums
        .iter()
        .map(|s| Image::new(s.width(), s.height(), 1))
        .collect();

    for y in 0..map.height() {
        for x in 0..map.width() {
            if target.is_missing(x, y) {
                continue;
            }
            let Some((l, i, j)) = nearest_target(map, lod, x, y, canonical, depth) else {
                continue;
            };
            for (acc, v) in sums[l].pixel_mut(i, j).iter_mut().zip(target.pixel(x, y)) {
                *acc += v;
            }
            weights[l].pixel_mut(i, j)[0] += 1.0;
        }
    }

    // Level l of the Gaussian pyramid sums every coarser Laplacian level
    // upsampled, so its adjoint pushes each level into all coarser ones.
    for l in 1..depth {
        let (w, h) = sums[l].dims();
        let carried = upsample_adjoint(&sums[l - 1], w, h);
        sums[l] = sums[l].add(&carried);
        let carried = upsample_adjoint(&weights[l - 1], w, h);
        weights[l] = weights[l].add(&carried);
    }
    Ok(Transport { sums, weights })
}

/// Inverse Laplacian warping: maps a target-view image to a masked
/// Laplacian pyramid in the canonical view.
pub fn inverse_warp(target: &Image, map: &UvMap, lod: &LodMap, depth: usize) -> Result<MaskedPyramid> {
    let transported = transport(target, map, lod, depth)?.normalized();
    extract_laplacian(transported)
}

/// Turns normalized transported levels into a masked Laplacian pyramid:
/// `mask * (P* - U(D(P*)))` where `P*` is the nearest-imputed level.
pub fn extract_laplacian(levels: Vec<Image>) -> Result<MaskedPyramid> {
    let depth = levels.len();
    let masks: Vec<Mask> = levels.iter().map(Image::defined_mask).collect();
    let mut out = Vec::with_capacity(depth);
    for (l, (level, mask)) in levels.into_iter().zip(&masks).enumerate() {
        if l + 1 == depth || !mask.any() {
            out.push(level);
            continue;
        }
        let imputed = impute_nearest(&level, mask)?;
        let low = upsample_to(&downsample_blur(&imputed)?, level.width(), level.height());
        let mut detail = imputed.sub(&low);
        detail.apply_mask(mask);
        out.push(detail);
    }
    Ok(MaskedPyramid { levels: out, masks })
}

/// Fills every pixel outside `mask` with the value of the nearest pixel
/// inside it (Euclidean distance; ties go to the smaller row, then the
/// smaller column).
pub fn impute_nearest(img: &Image, mask: &Mask) -> Result<Image> {
    if mask.dims() != img.dims() {
        return Err(Error::Size(format!(
            "mask {:?} vs image {:?}",
            mask.dims(),
            img.dims()
        )));
    }
    if !mask.any() {
        return Err(Error::EmptyMask);
    }
    if mask.all() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let c = img.channels();
    let columns: Vec<Vec<usize>> = (0..h)
        .map(|y| (0..w).filter(|&x| mask.get(x, y)).collect())
        .collect();

    let mut out = img.clone();
    out.data_mut()
        .par_chunks_mut(w * c)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                if mask.get(x, y) {
                    continue;
                }
                let (sx, sy) = nearest_defined(&columns, x, y);
                row[x * c..(x + 1) * c].copy_from_slice(img.pixel(sx, sy));
            }
        });
    Ok(out)
}

/// Nearest defined pixel to `(x, y)`, scanning rows outward by distance.
fn nearest_defined(columns: &[Vec<usize>], x: usize, y: usize) -> (usize, usize) {
    let h = columns.len();
    // (squared distance, row, column), compared lexicographically
    let mut best: Option<(u64, usize, usize)> = None;
    let better = |cand: (u64, usize, usize), best: &Option<(u64, usize, usize)>| match best {
        None => true,
        Some(b) => cand.cmp(b) == Ordering::Less,
    };
    for d in 0..h {
        let dd = (d as u64) * (d as u64);
        if let Some((bd, _, _)) = best {
            if dd > bd {
                break;
            }
        }
        let rows = [y.checked_sub(d), (d > 0).then_some(y + d).filter(|r| *r < h)];
        for row in rows.into_iter().flatten() {
            let cols = &columns[row];
            if cols.is_empty() {
                continue;
            }
            let k = cols.partition_point(|&cx| cx < x);
            for idx in [k.checked_sub(1), (k < cols.len()).then_some(k)].into_iter().flatten() {
                let cx = cols[idx];
                let dx = cx.abs_diff(x) as u64;
                let cand = (dd + dx * dx, row, cx);
                if better(cand, &best) {
                    best = Some(cand);
                }
            }
        }
    }
    let (_, row, col) = best.expect("mask has at least one defined pixel");
    (col, row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::{build_gaussian, build_laplacian, reconstruct};
    use crate::uvmap::compute_lod;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, c, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn flip_map(n: usize) -> UvMap {
        UvMap::from_fn(n, n, |x, y| {
            Some(((x as f32 + 0.5) / n as f32, ((n - 1 - y) as f32 + 0.5) / n as f32))
        })
    }

    /// O(N^2) all-pairs nearest scan.
    fn impute_oracle(img: &Image, mask: &Mask) -> Image {
        let (w, h) = img.dims();
        Image::from_fn(w, h, img.channels(), |x, y, c| {
            if mask.get(x, y) {
                return img.get(x, y, c);
            }
            let mut best = (u64::MAX, 0, 0);
            for sy in 0..h {
                for sx in 0..w {
                    if mask.get(sx, sy) {
                        let d = (sx.abs_diff(x).pow(2) + sy.abs_diff(y).pow(2)) as u64;
                        if (d, sy, sx) < best {
                            best = (d, sy, sx);
                        }
                    }
                }
            }
            img.get(best.2, best.1, c)
        })
    }

    #[test]
    fn identity_nearest_copies_base() {
        let img = random_image(16, 16, 3, 1);
        let g = build_gaussian(&img, 3).unwrap();
        let map = UvMap::identity(16);
        let lod = compute_lod(&map, 16).unwrap();
        let out = forward_warp(&g, &map, &lod, SampleMode::Nearest).unwrap();
        assert_eq!(out.data(), img.data());
        let tri = forward_warp(&g, &map, &lod, SampleMode::Trilinear).unwrap();
        assert!(tri.max_abs_diff(&img) < 1e-6);
    }

    #[test]
    fn minifying_map_reads_level_one() {
        let img = random_image(16, 16, 1, 2);
        let g = build_gaussian(&img, 3).unwrap();
        let map = UvMap::identity(8);
        let lod = compute_lod(&map, 16).unwrap();
        assert!(lod.values().iter().all(|l| *l == 1.0));
        let out = forward_warp(&g, &map, &lod, SampleMode::Nearest).unwrap();
        // direct blur + stride oracle
        let want = Image::from_fn(8, 8, 1, |i, j, _| {
            let taps = [1.0f32, 3.0, 3.0, 1.0];
            let mut acc = 0.0;
            for (ky, wy) in taps.iter().enumerate() {
                for (kx, wx) in taps.iter().enumerate() {
                    let x = (2 * i as isize - 1 + kx as isize).clamp(0, 15) as usize;
                    let y = (2 * j as isize - 1 + ky as isize).clamp(0, 15) as usize;
                    acc += wx * wy * img.get(x, y, 0);
                }
            }
            acc / 64.0
        });
        assert!(out.max_abs_diff(&want) < 1e-6);
    }

    #[test]
    fn flip_map_flips() {
        let img = random_image(8, 8, 1, 3);
        let g = build_gaussian(&img, 2).unwrap();
        let map = flip_map(8);
        let lod = compute_lod(&map, 8).unwrap();
        let out = forward_warp(&g, &map, &lod, SampleMode::Nearest).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(out.get(x, y, 0), img.get(x, 7 - y, 0));
            }
        }
    }

    #[test]
    fn invalid_pixels_render_missing() {
        let img = random_image(8, 8, 2, 4);
        let g = build_gaussian(&img, 2).unwrap();
        let mut map = UvMap::identity(8);
        map.set(2, 5, None);
        let lod = compute_lod(&map, 8).unwrap();
        let out = forward_warp(&g, &map, &lod, SampleMode::Trilinear).unwrap();
        assert!(out.is_missing(2, 5));
        assert_eq!(out.defined_mask().count(), 63);
    }

    #[test]
    fn forward_rejects_mismatched_lod() {
        let g = build_gaussian(&Image::new(8, 8, 1), 2).unwrap();
        let lod = compute_lod(&UvMap::identity(4), 8).unwrap();
        assert!(matches!(
            forward_warp(&g, &UvMap::identity(8), &lod, SampleMode::Nearest),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn identity_inverse_reconstructs() {
        let img = random_image(32, 32, 3, 5);
        let map = UvMap::identity(32);
        let lod = compute_lod(&map, 32).unwrap();
        let inv = inverse_warp(&img, &map, &lod, 4).unwrap();
        assert!(inv.masks().iter().all(Mask::all));
        let pyr = Pyramid::from_levels(PyramidKind::Laplacian, inv.levels().to_vec()).unwrap();
        assert!(reconstruct(&pyr).unwrap().max_abs_diff(&img) < 1e-4);
        let lap = build_laplacian(&img, 4).unwrap();
        for (a, b) in inv.levels().iter().zip(lap.levels()) {
            assert!(a.max_abs_diff(b) < 1e-5);
        }
    }

    #[test]
    fn flip_inverse_level_zero_is_flipped() {
        let img = random_image(16, 16, 1, 6);
        let map = flip_map(16);
        let lod = compute_lod(&map, 16).unwrap();
        let t = transport(&img, &map, &lod, 3).unwrap().normalized();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(t[0].get(x, y, 0), img.get(x, 15 - y, 0));
            }
        }
    }

    #[test]
    fn missing_target_pixels_are_skipped() {
        let mut img = random_image(8, 8, 1, 7);
        img.set_missing(0, 0);
        let map = UvMap::identity(8);
        let lod = compute_lod(&map, 8).unwrap();
        let t = transport(&img, &map, &lod, 1).unwrap();
        assert_eq!(t.weights[0].get(0, 0, 0), 0.0);
        assert!(t.normalized()[0].is_missing(0, 0));
    }

    #[test]
    fn inverse_depth_error() {
        let map = UvMap::identity(8);
        let lod = compute_lod(&map, 8).unwrap();
        assert!(matches!(
            inverse_warp(&Image::new(8, 8, 1), &map, &lod, 5),
            Err(Error::Depth { .. })
        ));
    }

    #[test]
    fn uniform_lod_routes_to_one_level() {
        // 4x minification: every deposit lands on level 2
        let map = UvMap::identity(8);
        let lod = compute_lod(&map, 32).unwrap();
        let img = random_image(8, 8, 1, 8);
        let t = transport(&img, &map, &lod, 4).unwrap();
        assert!(t.weights[0].data().iter().all(|w| *w == 0.0));
        assert!(t.weights[1].data().iter().all(|w| *w == 0.0));
        assert!(t.weights[2].data().iter().all(|w| *w == 1.0));
    }

    #[test]
    fn impute_cases() {
        let img = random_image(5, 5, 2, 9);
        assert_eq!(
            impute_nearest(&img, &Mask::new(5, 5, true)).unwrap().data(),
            img.data()
        );
        assert!(matches!(
            impute_nearest(&img, &Mask::new(5, 5, false)),
            Err(Error::EmptyMask)
        ));
        let mut one = Mask::new(5, 5, false);
        one.set(2, 3, true);
        let out = impute_nearest(&img, &one).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(out.pixel(x, y), img.pixel(2, 3));
            }
        }
        let mut two = Mask::new(5, 5, false);
        two.set(0, 0, true);
        two.set(4, 2, true);
        assert_eq!(
            impute_nearest(&img, &two).unwrap().data(),
            impute_oracle(&img, &two).data()
        );
    }

    #[test]
    fn impute_matches_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for seed in 0..20 {
            let img = random_image(11, 7, 1, 100 + seed);
            let p = rng.random_range(0.02..0.5);
            let mut mask = Mask::from_fn(11, 7, |_, _| rng.random_bool(p));
            mask.set(rng.random_range(0..11), rng.random_range(0..7), true);
            assert_eq!(
                impute_nearest(&img, &mask).unwrap().data(),
                impute_oracle(&img, &mask).data()
            );
        }
    }

    #[test]
    fn impute_tie_prefers_smaller_row_then_column() {
        let img = Image::from_fn(3, 3, 1, |x, y, _| (y * 3 + x) as f32);
        // centre is equidistant from all four edge midpoints
        let mut mask = Mask::new(3, 3, false);
        for (x, y) in [(1, 0), (0, 1), (2, 1), (1, 2)] {
            mask.set(x, y, true);
        }
        let out = impute_nearest(&img, &mask).unwrap();
        assert_eq!(out.get(1, 1, 0), 1.0);
        let mut row = Mask::new(3, 3, false);
        row.set(0, 1, true);
        row.set(2, 1, true);
        assert_eq!(impute_nearest(&img, &row).unwrap().get(1, 1, 0), 3.0);
    }

    #[test]
    fn extraction_masks_match_hits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut map = UvMap::new(12, 12);
        for y in 0..12 {
            for x in 0..12 {
                if rng.random_bool(0.7) {
                    map.set(x, y, Some((rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))));
                }
            }
        }
        let lod = compute_lod(&map, 16).unwrap();
        let img = random_image(12, 12, 1, 12);
        let t = transport(&img, &map, &lod, 3).unwrap();
        let inv = inverse_warp(&img, &map, &lod, 3).unwrap();
        for (l, mask) in inv.masks().iter().enumerate() {
            for y in 0..mask.height() {
                for x in 0..mask.width() {
                    assert_eq!(mask.get(x, y), t.weights[l].get(x, y, 0) > 0.0);
                    assert_eq!(mask.get(x, y), !inv.level(l).is_missing(x, y));
                }
            }
        }
    }

    #[test]
    fn preview_is_missing_free() {
        let map = UvMap::from_fn(16, 16, |x, y| {
            (x < 8).then(|| ((x as f32 + 0.5) / 16.0, (y as f32 + 0.5) / 16.0))
        });
        let lod = compute_lod(&map, 16).unwrap();
        let img = random_image(16, 16, 1, 13);
        let inv = inverse_warp(&img, &map, &lod, 3).unwrap();
        let p = inv.preview().unwrap();
        assert!(!p.has_missing());
    }
}
