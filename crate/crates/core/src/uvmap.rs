//! View functions as UV lookup rasters.
//!
//! A [`UvMap`] stores, for every target-view pixel, where to fetch a value
//! in the canonical view. Coordinates are normalized to `[0, 1]` with pixel
//! centers at `(i + 0.5) / n`, so the identity map of an `n`-pixel canonical
//! image stores `u = (x + 0.5) / n`.
//!
//! # UVM1 files
//!
//! ```text
//! offset  size          content
//! 0       4             magic "UVM1" (0x55 0x56 0x4D 0x31)
//! 4       4             width, u32 little-endian
//! 8       4             height, u32 little-endian
//! 12      12 * w * h    records, row-major: u, v, validity as f32 little-endian
//! ```
//!
//! Validity is `1.0` or `0.0`; invalid records store `u = v = 0`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Mask, MISSING};

pub const UVM_MAGIC: [u8; 4] = *b"UVM1";
const HEADER_LEN: usize = 12;
const RECORD_LEN: usize = 12;

/// Raw LOD values within this distance of an integer snap to it.
///
/// UVs are stored as f32; differencing neighbours of a 1024-pixel map leaves
/// about 1e-4 of relative noise in the gradient, so finer LOD resolution is
/// not meaningful.
pub const LOD_SNAP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct UvMap {
    width: usize,
    height: usize,
    uv: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl UvMap {
    /// A map with every pixel invalid.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            uv: vec![[0.0; 2]; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> Option<(f32, f32)> + Sync,
    ) -> Self {
        let samples: Vec<Option<(f32, f32)>> = (0..width * height)
            .into_par_iter()
            .map(|i| f(i % width, i / width))
            .collect();
        let mut map = Self::new(width, height);
        for (i, s) in samples.into_iter().enumerate() {
            if let Some((u, v)) = s {
                map.uv[i] = [u, v];
                map.valid[i] = true;
            }
        }
        map
    }

    /// Identity map for an `n` x `n` canonical view.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |x, y| Some((pixel_center(x, n), pixel_center(y, n))))
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
    pub fn get(&self, x: usize, y: usize) -> Option<(f32, f32)> {
        let i = y * self.width + x;
        self.valid[i].then(|| (self.uv[i][0], self.uv[i][1]))
    }

    pub fn set(&mut self, x: usize, y: usize, uv: Option<(f32, f32)>) {
        let i = y * self.width + x;
        match uv {
            Some((u, v)) => {
                self.uv[i] = [u, v];
                self.valid[i] = true;
            }
            None => {
                self.uv[i] = [0.0; 2];
                self.valid[i] = false;
            }
        }
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_mask(&self) -> Mask {
        Mask::from_vec(self.width, self.height, self.valid.clone()).expect("mask dims")
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// True when this is exactly [`UvMap::identity`] for its own size.
    pub fn is_identity(&self) -> bool {
        self.width == self.height && *self == Self::identity(self.width)
    }

    /// Checks the type invariants: valid coordinates lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some((u, v)) = self.get(x, y) {
                    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                        return Err(Error::Range { x, y, u, v });
                    }
                }
            }
        }
        Ok(())
    }

    /// The map with target axes swapped.
    pub fn transposed(&self) -> UvMap {
        UvMap::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Serializes to UVM1 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.uv.len());
        out.extend_from_slice(&UVM_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for (uv, valid) in self.uv.iter().zip(&self.valid) {
            out.extend_from_slice(&uv[0].to_le_bytes());
            out.extend_from_slice(&uv[1].to_le_bytes());
            out.extend_from_slice(&(if *valid { 1.0f32 } else { 0.0 }).to_le_bytes());
        }
        out
    }

    /// Parses UVM1 bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncation {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        if bytes[..4] != UVM_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncation {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(RECORD_LEN))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format(format!("dimensions {width}x{height} overflow")))?;
        if bytes.len() < expected {
            return Err(Error::Truncation {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                bytes.len() - expected
            )));
        }

        let f32_at = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let mut map = UvMap::new(width, height);
        for i in 0..width * height {
            let off = HEADER_LEN + i * RECORD_LEN;
            let (u, v, flag) = (f32_at(off), f32_at(off + 4), f32_at(off + 8));
            let (x, y) = (i % width, i / width);
            if flag == 1.0 {
                if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Range { x, y, u, v });
                }
                map.uv[i] = [u, v];
                map.valid[i] = true;
            } else if flag == 0.0 {
                if u != 0.0 || v != 0.0 {
                    return Err(Error::Format(format!(
                        "invalid pixel ({x}, {y}) stores non-zero uv"
                    )));
                }
            } else {
                return Err(Error::Format(format!(
                    "validity {flag} at ({x}, {y}) is neither 0 nor 1"
                )));
            }
        }
        Ok(map)
    }
}

#[inline]
pub(crate) fn pixel_center(i: usize, n: usize) -> f32 {
    (i as f32 + 0.5) / n as f32
}

pub fn write_uvm(map: &UvMap, path: impl AsRef<Path>) -> Result<()> {
    map.validate()?;
    let mut f = fs::File::create(path)?;
    f.write_all(&map.to_bytes())?;
    Ok(())
}

pub fn read_uvm(path: impl AsRef<Path>) -> Result<UvMap> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    UvMap::from_bytes(&bytes)
}

/// Block-subsamples a map by an integer factor.
///
/// Each output pixel represents the center of its `factor` x `factor` block:
/// the center sample for odd factors, the mean of the four central samples
/// for even factors. The block is valid iff every representative sample is.
pub fn downscale_uvmap(map: &UvMap, factor: usize) -> Result<UvMap> {
    if factor == 0 || map.width % factor != 0 || map.height % factor != 0 {
        return Err(Error::Size(format!(
            "factor {factor} does not divide {}x{}",
            map.width, map.height
        )));
    }
    let centers: &[usize] = if factor % 2 == 1 {
        &[factor / 2]
    } else {
        &[factor / 2 - 1, factor / 2]
    };
    let (w, h) = (map.width / factor, map.height / factor);
    Ok(UvMap::from_fn(w, h, |i, j| {
        let mut su = 0.0f64;
        let mut sv = 0.0f64;
        for &dy in centers {
            for &dx in centers {
                let (u, v) = map.get(i * factor + dx, j * factor + dy)?;
                su += u as f64;
                sv += v as f64;
            }
        }
        let n = (centers.len() * centers.len()) as f64;
        Some(((su / n) as f32, (sv / n) as f32))
    }))
}

/// Per-pixel pyramid level for one view, in units of the canonical view's
/// pixels. Undefined entries hold [`MISSING`].
#[derive(Clone, Debug, PartialEq)]
pub struct LodMap {
    width: usize,
    height: usize,
    canonical_size: usize,
    levels: Vec<f32>,
}

impl LodMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Side of the square canonical view the levels were computed for.
    pub fn canonical_size(&self) -> usize {
        self.canonical_size
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let l = self.levels[y * self.width + x];
        (!l.is_nan()).then_some(l)
    }

    pub fn values(&self) -> &[f32] {
        &self.levels
    }

    pub fn transposed(&self) -> LodMap {
        let mut levels = vec![MISSING; self.levels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                levels[x * self.height + y] = self.levels[y * self.width + x];
            }
        }
        LodMap {
            width: self.height,
            height: self.width,
            canonical_size: self.canonical_size,
            levels,
        }
    }
}

/// One-sided difference of `axis` (0 = u, 1 = v) along x (`dx = 1`) or y.
///
/// Uses the forward neighbour when it is in range and valid, otherwise the
/// backward neighbour; `None` when neither is usable.
fn difference(map: &UvMap, x: usize, y: usize, along_x: bool) -> Option<[f64; 2]> {
    let here = map.get(x, y)?;
    let (fwd, bwd) = if along_x {
        (
            (x + 1 < map.width).then(|| map.get(x + 1, y)).flatten(),
            (x > 0).then(|| map.get(x - 1, y)).flatten(),
        )
    } else {
        (
            (y + 1 < map.height).then(|| map.get(x, y + 1)).flatten(),
            (y > 0).then(|| map.get(x, y - 1)).flatten(),
        )
    };
    if let Some(f) = fwd {
        Some([f.0 as f64 - here.0 as f64, f.1 as f64 - here.1 as f64])
    } else {
        bwd.map(|b| [here.0 as f64 - b.0 as f64, here.1 as f64 - b.1 as f64])
    }
}

fn snap_lod(raw: f64) -> f64 {
    if !raw.is_finite() {
        return if raw > 0.0 { raw } else { 0.0 };
    }
    let r = raw.round();
    let l = if (raw - r).abs() <= LOD_SNAP { r } else { raw };
    l.max(0.0)
}

/// Level of detail from the UV Jacobian:
/// `log2(max(|grad u|, |grad v|))` with UVs scaled to canonical pixels.
pub fn compute_lod(map: &UvMap, canonical_size: usize) -> Result<LodMap> {
    if canonical_size < 2 {
        return Err(Error::Size(format!(
            "canonical size {canonical_size} must be at least 2"
        )));
    }
    let scale = canonical_size as f64;
    let levels: Vec<f32> = (0..map.width * map.height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % map.width, i / map.width);
            let (Some(dx), Some(dy)) = (difference(map, x, y, true), difference(map, x, y, false))
            else {
                return MISSING;
            };
            let grad_u = (dx[0] * scale).hypot(dy[0] * scale);
            let grad_v = (dx[1] * scale).hypot(dy[1] * scale);
            snap_lod(grad_u.max(grad_v).log2()) as f32
        })
        .collect();
    Ok(LodMap {
        width: map.width,
        height: map.height,
        canonical_size,
        levels,
    })
}
