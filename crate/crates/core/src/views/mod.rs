//! View functions: closed-form 2D transforms and raytraced mirror and lens
//! setups, each producing a [`UvMap`] into the canonical image.

pub mod geom;
pub mod optics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::kv::KeyValues;
use crate::pyramid::{build_gaussian, default_depth};
use crate::uvmap::{compute_lod, pixel_center, UvMap};
use crate::warp::{forward_warp, SampleMode};

pub use optics::{ConeMirror, CylinderMirror, FacetLens};

#[derive(Clone, Debug, PartialEq)]
pub enum ViewKind {
    Identity,
    /// Upside down.
    Flip,
    /// Counter-clockwise in image coordinates (x right, y down).
    Rotate { degrees: f64 },
    /// Square blocks shuffled by a seeded permutation.
    Permute { block: usize, seed: u64 },
    Cone(ConeMirror),
    Cylinder(CylinderMirror),
    Lens(FacetLens),
}

impl ViewKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Flip => "flip",
            Self::Rotate { .. } => "rotate",
            Self::Permute { .. } => "permute",
            Self::Cone(_) => "cone",
            Self::Cylinder(_) => "cylinder",
            Self::Lens(_) => "lens",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewScene {
    pub kind: ViewKind,
    /// Side of the square target view, if the scene fixes it.
    pub resolution: Option<usize>,
}

impl ViewScene {
    pub fn new(kind: ViewKind) -> Self {
        Self {
            kind,
            resolution: None,
        }
    }

    /// Parses a scene file. Unknown kinds and keys are parse errors; values
    /// that parse but describe impossible geometry are geometry errors.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let kind: String = kv.require("kind")?;
        let resolution = kv.get("resolution")?;
        let (kind, keys): (ViewKind, &[&str]) = match kind.as_str() {
            "identity" => (ViewKind::Identity, &[]),
            "flip" => (ViewKind::Flip, &[]),
            "rotate" => (
                ViewKind::Rotate {
                    degrees: kv.require("degrees")?,
                },
                &["degrees"],
            ),
            "permute" => (
                ViewKind::Permute {
                    block: kv.get_or("block", 8)?,
                    seed: kv.get_or("seed", 0)?,
                },
                &["block", "seed"],
            ),
            "cone" => {
                let d = ConeMirror::default();
                (
                    ViewKind::Cone(ConeMirror {
                        base_radius: kv.get_or("base_radius", d.base_radius)?,
                        apex_half_angle: kv.get_or("apex_half_angle", d.apex_half_angle)?,
                    }),
                    &["base_radius", "apex_half_angle"],
                )
            }
            "cylinder" => {
                let d = CylinderMirror::default();
                (
                    ViewKind::Cylinder(CylinderMirror {
                        radius: kv.get_or("radius", d.radius)?,
                        height: kv.get_or("height", d.height)?,
                        camera_elevation: kv.get_or("camera_elevation", d.camera_elevation)?,
                        camera_distance: kv.get_or("camera_distance", d.camera_distance)?,
                        field_of_view: kv.get_or("field_of_view", d.field_of_view)?,
                        aim_height: kv.get_or("aim_height", d.aim_height)?,
                    }),
                    &[
                        "radius",
                        "height",
                        "camera_elevation",
                        "camera_distance",
                        "field_of_view",
                        "aim_height",
                    ],
                )
            }
            "lens" => {
                let d = FacetLens::default();
                (
                    ViewKind::Lens(FacetLens {
                        facet_count: kv.get_or("facet_count", d.facet_count)?,
                        refractive_index: kv.get_or("refractive_index", d.refractive_index)?,
                        thickness: kv.get_or("thickness", d.thickness)?,
                        distance_to_plane: kv.get_or("distance_to_plane", d.distance_to_plane)?,
                        radius: kv.get_or("radius", d.radius)?,
                        rotation: kv.get_or("rotation", d.rotation)?,
                        camera_distance: kv.get_or("camera_distance", d.camera_distance)?,
                    }),
                    &[
                        "facet_count",
                        "refractive_index",
                        "thickness",
                        "distance_to_plane",
                        "radius",
                        "rotation",
                        "camera_distance",
                    ],
                )
            }
            other => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("unknown view kind `{other}`"),
                })
            }
        };
        let mut allowed = vec!["kind", "resolution"];
        allowed.extend_from_slice(keys);
        kv.check_keys(&allowed)?;
        Ok(Self { kind, resolution })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ViewKind::Identity | ViewKind::Flip => Ok(()),
            ViewKind::Rotate { degrees } if !degrees.is_finite() => {
                Err(Error::Geometry("rotation angle must be finite".into()))
            }
            ViewKind::Rotate { .. } => Ok(()),
            ViewKind::Permute { block, .. } if *block == 0 => {
                Err(Error::Geometry("permutation block must be positive".into()))
            }
            ViewKind::Permute { .. } => Ok(()),
            ViewKind::Cone(c) => c.validate(),
            ViewKind::Cylinder(c) => c.validate(),
            ViewKind::Lens(l) => l.validate(),
        }
    }
}

fn rotate_about_centre(sx: f64, sy: f64, degrees: f64) -> (f64, f64) {
    let (s, c) = degrees.to_radians().sin_cos();
    let (x, y) = (sx - 0.5, sy - 0.5);
    (0.5 + c * x - s * y, 0.5 + s * x + c * y)
}

/// Canonical coordinates seen at normalized target position `(sx, sy)`,
/// for the continuous (non-permutation) scenes.
pub fn trace_point(kind: &ViewKind, sx: f64, sy: f64) -> Option<(f64, f64)> {
    match kind {
        ViewKind::Identity => Some((sx, sy)),
        ViewKind::Flip => Some((sx, 1.0 - sy)),
        ViewKind::Rotate { degrees } => {
            let inside = (sx - 0.5).hypot(sy - 0.5) <= 0.5;
            inside.then(|| rotate_about_centre(sx, sy, *degrees))
        }
        ViewKind::Permute { .. } => None,
        ViewKind::Cone(c) => c.trace(sx, sy),
        ViewKind::Cylinder(c) => c.trace(sx, sy),
        ViewKind::Lens(l) => l.trace(sx, sy),
    }
}

fn quarter_turns(degrees: f64) -> Option<u32> {
    let q = degrees / 90.0;
    (q == q.round()).then(|| q.rem_euclid(4.0) as u32)
}

fn permutation_map(n: usize, block: usize, seed: u64) -> Result<UvMap> {
    if n % block != 0 {
        return Err(Error::Geometry(format!(
            "block {block} does not divide resolution {n}"
        )));
    }
    let per_side = n / block;
    let mut order: Vec<usize> = (0..per_side * per_side).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(UvMap::from_fn(n, n, |x, y| {
        let src = order[(y / block) * per_side + x / block];
        let sx = (src % per_side) * block + x % block;
        let sy = (src / per_side) * block + y % block;
        Some((pixel_center(sx, n), pixel_center(sy, n)))
    }))
}

/// Closed-form 2D views. Right-angle rotations and flips are exact pixel
/// permutations; other angles keep only the inscribed disc.
pub fn make_2d_map(kind: &ViewKind, n: usize) -> Result<UvMap> {
    if n < 2 {
        return Err(Error::Size(format!("resolution {n} below 2")));
    }
    let centre = |i: usize| pixel_center(i, n);
    match kind {
        ViewKind::Identity => Ok(UvMap::identity(n)),
        ViewKind::Flip => Ok(UvMap::from_fn(n, n, |x, y| {
            Some((centre(x), centre(n - 1 - y)))
        })),
        ViewKind::Rotate { degrees } => match quarter_turns(*degrees) {
            Some(q) => Ok(UvMap::from_fn(n, n, |x, y| {
                let (sx, sy) = match q {
                    0 => (x, y),
                    1 => (n - 1 - y, x),
                    2 => (n - 1 - x, n - 1 - y),
                    _ => (y, n - 1 - x),
                };
                Some((centre(sx), centre(sy)))
            })),
            None => Ok(sample_continuous(kind, n)),
        },
        ViewKind::Permute { block, seed } => permutation_map(n, *block, *seed),
        _ => Err(Error::Geometry(format!(
            "`{}` is not a 2D transform",
            kind.name()
        ))),
    }
}

fn sample_continuous(kind: &ViewKind, n: usize) -> UvMap {
    UvMap::from_fn(n, n, |x, y| {
        let s = |i: usize| (i as f64 + 0.5) / n as f64;
        trace_point(kind, s(x), s(y)).map(|(u, v)| (u as f32, v as f32))
    })
}

/// Builds the view's UvMap at `n × n`, one ray per pixel centre.
pub fn trace_view(scene: &ViewScene, n: usize) -> Result<UvMap> {
    scene.validate()?;
    let map = match &scene.kind {
        ViewKind::Cone(_) | ViewKind::Cylinder(_) | ViewKind::Lens(_) => {
            if n < 2 {
                return Err(Error::Size(format!("resolution {n} below 2")));
            }
            sample_continuous(&scene.kind, n)
        }
        kind => make_2d_map(kind, n)?,
    };
    if map.valid_count() == 0 {
        return Err(Error::Geometry(format!(
            "`{}` scene sees none of the image plane",
            scene.kind.name()
        )));
    }
    map.validate()?;
    Ok(map)
}

/// Renders what the scene shows of `canonical`, anti-aliased through the
/// level-of-detail pyramid.
pub fn render_validation(scene: &ViewScene, canonical: &Image, n: usize) -> Result<Image> {
    let (w, h) = canonical.dims();
    if w != h {
        return Err(Error::Size(format!("canonical image must be square, got {w}x{h}")));
    }
    let map = trace_view(scene, n)?;
    let lod = compute_lod(&map, w)?;
    let pyr = build_gaussian(canonical, default_depth(w, h))?;
    forward_warp(&pyr, &map, &lod, SampleMode::Nearest)
}
