//! Analytic catadioptric setups: a conical mirror, a cylindrical mirror and
//! a faceted lens, all standing on the unit-square image plane `z = 0`.

use std::f64::consts::PI;

use super::geom::{reflect, refract, Ray, Vec3};
use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{name} must be positive, got {v}")))
    }
}

/// Pinhole camera. Pixel coordinates are normalized to `[0, 1]`.
#[derive(Clone, Copy, Debug)]
struct Camera {
    eye: Vec3,
    forward: Vec3,
    right: Vec3,
    down: Vec3,
    half_extent: f64,
}

impl Camera {
    fn looking_at(eye: Vec3, target: Vec3, up: Vec3, fov_degrees: f64) -> Self {
        let forward = (target - eye).normalized();
        let right = forward.cross(up).normalized();
        let down = forward.cross(right);
        Self {
            eye,
            forward,
            right,
            down,
            half_extent: (fov_degrees.to_radians() / 2.0).tan(),
        }
    }

    fn ray(&self, sx: f64, sy: f64) -> Ray {
        let a = (2.0 * sx - 1.0) * self.half_extent;
        let b = (2.0 * sy - 1.0) * self.half_extent;
        Ray::new(self.eye, self.forward + self.right * a + self.down * b)
    }
}

/// Cone standing apex-up at the plane centre, seen orthographically from
/// straight above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeMirror {
    pub base_radius: f64,
    /// Angle between the axis and the mirror surface.
    pub apex_half_angle: f64,
}

impl Default for ConeMirror {
    fn default() -> Self {
        Self {
            base_radius: 0.3,
            apex_half_angle: 22.5,
        }
    }
}

impl ConeMirror {
    pub fn validate(&self) -> Result<()> {
        positive("base_radius", self.base_radius)?;
        positive("apex_half_angle", self.apex_half_angle)?;
        // at 45 degrees and above, vertical rays reflect level or upward
        if self.apex_half_angle >= 45.0 {
            return Err(Error::Geometry(format!(
                "apex_half_angle {} reflects vertical rays away from the plane; use < 45",
                self.apex_half_angle
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.base_radius / self.apex_half_angle.to_radians().tan()
    }

    pub fn trace(&self, sx: f64, sy: f64) -> Option<(f64, f64)> {
        let (dx, dy) = (sx - 0.5, sy - 0.5);
        let rho = dx.hypot(dy);
        if rho >= self.base_radius {
            return Some((sx, sy));
        }
        if rho == 0.0 {
            return None;
        }
        let alpha = self.apex_half_angle.to_radians();
        let z = (self.base_radius - rho) / alpha.tan();
        let radial = Vec3::new(dx / rho, dy / rho, 0.0);
        let normal = radial * alpha.cos() + Vec3::new(0.0, 0.0, alpha.sin());
        let incoming = Vec3::new(0.0, 0.0, -1.0);
        let hit = Vec3::new(sx, sy, z);
        Ray::new(hit, reflect(incoming, normal)).land()
    }
}

/// Vertical cylinder standing on the plane, viewed in perspective from the
/// side. Only its reflection is part of the view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderMirror {
    pub radius: f64,
    pub height: f64,
    pub camera_elevation: f64,
    pub camera_distance: f64,
    pub field_of_view: f64,
    /// Height on the axis the camera looks at.
    pub aim_height: f64,
}

/// Where the cylinder stands on the plane.
pub const CYLINDER_AXIS: (f64, f64) = (0.5, 0.25);

impl Default for CylinderMirror {
    fn default() -> Self {
        Self {
            radius: 0.15,
            height: 0.6,
            camera_elevation: 30.0,
            camera_distance: 2.0,
            field_of_view: 8.0,
            aim_height: 0.15,
        }
    }
}

impl CylinderMirror {
    pub fn validate(&self) -> Result<()> {
        positive("radius", self.radius)?;
        positive("height", self.height)?;
        positive("camera_distance", self.camera_distance)?;
        positive("field_of_view", self.field_of_view)?;
        if !(0.0..90.0).contains(&self.camera_elevation) {
            return Err(Error::Geometry(format!(
                "camera_elevation must be in [0, 90), got {}",
                self.camera_elevation
            )));
        }
        if !self.aim_height.is_finite() {
            return Err(Error::Geometry("aim_height must be finite".into()));
        }
        if self.field_of_view >= 180.0 {
            return Err(Error::Geometry("field_of_view must be below 180".into()));
        }
        if self.camera_distance <= self.radius {
            return Err(Error::Geometry("camera sits inside the cylinder".into()));
        }
        Ok(())
    }

    fn camera(&self) -> Camera {
        let (ax, ay) = CYLINDER_AXIS;
        let target = Vec3::new(ax, ay, self.aim_height);
        let e = self.camera_elevation.to_radians();
        let eye = target + Vec3::new(0.0, e.cos(), e.sin()) * self.camera_distance;
        Camera::looking_at(eye, target, Vec3::new(0.0, 0.0, 1.0), self.field_of_view)
    }

    pub fn trace(&self, sx: f64, sy: f64) -> Option<(f64, f64)> {
        let ray = self.camera().ray(sx, sy);
        let (ax, ay) = CYLINDER_AXIS;
        let (ox, oy) = (ray.origin.x - ax, ray.origin.y - ay);
        let (dx, dy) = (ray.dir.x, ray.dir.y);
        let a = dx * dx + dy * dy;
        if a == 0.0 {
            return None;
        }
        let b = ox * dx + oy * dy;
        let c = ox * ox + oy * oy - self.radius * self.radius;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let s = (-b - disc.sqrt()) / a;
        if s <= 0.0 {
            return None;
        }
        let hit = ray.at(s);
        if !(0.0..=self.height).contains(&hit.z) {
            return None;
        }
        let normal = Vec3::new((hit.x - ax) / self.radius, (hit.y - ay) / self.radius, 0.0);
        Ray::new(hit, reflect(ray.dir, normal)).land()
    }
}

/// Lens with a flat back face parallel to the plane and a shallow pyramidal
/// front made of `facet_count` planar facets meeting at the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacetLens {
    pub facet_count: usize,
    pub refractive_index: f64,
    /// Glass thickness at the apex.
    pub thickness: f64,
    /// Height of the back face above the plane.
    pub distance_to_plane: f64,
    /// Circumradius of the facet polygon.
    pub radius: f64,
    /// Spin of the facets about the axis, in degrees.
    pub rotation: f64,
    /// Height of the eye above the apex.
    pub camera_distance: f64,
}

impl Default for FacetLens {
    fn default() -> Self {
        Self {
            facet_count: 7,
            refractive_index: 1.5,
            thickness: 0.05,
            distance_to_plane: 1.0,
            radius: 0.3,
            rotation: 0.0,
            camera_distance: 1.0,
        }
    }
}

impl FacetLens {
    pub fn validate(&self) -> Result<()> {
        if self.facet_count < 3 {
            return Err(Error::Geometry(format!(
                "need at least 3 facets, got {}",
                self.facet_count
            )));
        }
        if !(self.refractive_index > 1.0 && self.refractive_index.is_finite()) {
            return Err(Error::Geometry(format!(
                "refractive_index must exceed 1, got {}",
                self.refractive_index
            )));
        }
        positive("thickness", self.thickness)?;
        positive("distance_to_plane", self.distance_to_plane)?;
        positive("radius", self.radius)?;
        positive("camera_distance", self.camera_distance)?;
        if !self.rotation.is_finite() {
            return Err(Error::Geometry("rotation must be finite".into()));
        }
        Ok(())
    }

    fn apothem(&self) -> f64 {
        self.radius * (PI / self.facet_count as f64).cos()
    }

    fn facet_direction(&self, j: usize) -> (f64, f64) {
        let phi = self.rotation.to_radians() + 2.0 * PI * j as f64 / self.facet_count as f64;
        (phi.cos(), phi.sin())
    }

    /// Signed height of `p` above facet `j`'s plane, and that plane's
    /// gradient along direction `d`.
    fn facet_eval(&self, j: usize, p: Vec3, d: Vec3) -> (f64, f64) {
        let (ex, ey) = self.facet_direction(j);
        let slope = self.thickness / self.apothem();
        let along = (p.x - 0.5) * ex + (p.y - 0.5) * ey;
        let f = p.z - self.distance_to_plane - self.thickness + slope * along;
        let df = d.z + slope * (d.x * ex + d.y * ey);
        (f, df)
    }

    fn facet_normal(&self, j: usize) -> Vec3 {
        let (ex, ey) = self.facet_direction(j);
        let slope = self.thickness / self.apothem();
        Vec3::new(slope * ex, slope * ey, 1.0).normalized()
    }

    fn camera(&self) -> Camera {
        let top = self.distance_to_plane + self.thickness;
        let eye = Vec3::new(0.5, 0.5, top + self.camera_distance);
        Camera {
            eye,
            forward: Vec3::new(0.0, 0.0, -1.0),
            right: Vec3::new(1.0, 0.0, 0.0),
            down: Vec3::new(0.0, 1.0, 0.0),
            half_extent: self.radius / (self.camera_distance + self.thickness),
        }
    }

    pub fn trace(&self, sx: f64, sy: f64) -> Option<(f64, f64)> {
        let ray = self.camera().ray(sx, sy);
        // enter where the ray passes below the last facet plane
        let mut entry = f64::NEG_INFINITY;
        let mut facet = 0;
        for j in 0..self.facet_count {
            let (f, df) = self.facet_eval(j, ray.origin, ray.dir);
            if df >= 0.0 {
                return None;
            }
            let s = -f / df;
            if s > entry {
                entry = s;
                facet = j;
            }
        }
        let hit = ray.at(entry);
        if hit.z < self.distance_to_plane {
            return None;
        }
        let n = self.refractive_index;
        let inside = refract(ray.dir, self.facet_normal(facet), 1.0, n)?;
        let inner = Ray::new(hit, inside);
        let back = inner.hit_height(self.distance_to_plane)?;
        for j in 0..self.facet_count {
            let (f, df) = self.facet_eval(j, hit, inner.dir);
            if df > 0.0 && j != facet && -f / df < back {
                return None;
            }
        }
        let exit = inner.at(back);
        let out = refract(inner.dir, Vec3::new(0.0, 0.0, 1.0), n, 1.0)?;
        Ray::new(exit, out).land()
    }
}
