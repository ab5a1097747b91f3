//! Minimal 3-vector algebra and the two optical interactions.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Self {
            origin,
            dir: dir.normalized(),
        }
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.origin + self.dir * s
    }

    /// Distance along the ray to the horizontal plane `z = height`, if ahead.
    pub fn hit_height(&self, height: f64) -> Option<f64> {
        if self.dir.z == 0.0 {
            return None;
        }
        let s = (height - self.origin.z) / self.dir.z;
        (s > 0.0).then_some(s)
    }

    /// Where the ray meets the image plane, if inside the unit square.
    pub fn land(&self) -> Option<(f64, f64)> {
        if self.dir.z >= 0.0 {
            return None;
        }
        let p = self.at(self.hit_height(0.0)?);
        ((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)).then_some((p.x, p.y))
    }
}

/// Mirror reflection of `d` about unit normal `n`.
pub fn reflect(d: Vec3, n: Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Refraction of unit `d` through a surface with unit normal `n` (either
/// orientation) from index `n1` into `n2`. `None` on total internal reflection.
pub fn refract(d: Vec3, n: Vec3, n1: f64, n2: f64) -> Option<Vec3> {
    let n = if d.dot(n) > 0.0 { -n } else { n };
    let eta = n1 / n2;
    let cos_i = -d.dot(n);
    let k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
    if k < 0.0 {
        return None;
    }
    Some(d * eta + n * (eta * cos_i - k.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(a: f64, b: f64) -> Vec3 {
        Vec3::new(a.sin() * b.cos(), a.sin() * b.sin(), a.cos())
    }

    fn sin_angle(a: Vec3, n: Vec3) -> f64 {
        a.cross(n).norm()
    }

    proptest! {
        #[test]
        fn reflection_keeps_length(a in 0.0..3.14f64, b in 0.0..6.28f64, c in 0.0..3.14f64, e in 0.0..6.28f64) {
            let r = reflect(unit(a, b), unit(c, e));
            prop_assert!((r.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn refraction_obeys_snell(a in 0.0..3.14f64, b in 0.0..6.28f64, c in 0.0..3.14f64, e in 0.0..6.28f64, n2 in 1.0..2.5f64) {
            let (d, n) = (unit(a, b), unit(c, e));
            for (i1, i2) in [(1.0, n2), (n2, 1.0)] {
                if let Some(t) = refract(d, n, i1, i2) {
                    prop_assert!((t.norm() - 1.0).abs() < 1e-9);
                    prop_assert!((i1 * sin_angle(d, n) - i2 * sin_angle(t, n)).abs() < 1e-9);
                    // stays on the far side of the surface
                    prop_assert!(t.dot(n) * d.dot(n) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn total_internal_reflection() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let grazing = Vec3::new(0.8, 0.0, 0.6);
        assert!(refract(grazing, n, 1.5, 1.0).is_none());
        assert!(refract(grazing, n, 1.0, 1.5).is_some());
    }

    #[test]
    fn normal_incidence_passes_straight() {
        let d = Vec3::new(0.0, 0.0, -1.0);
        let t = refract(d, Vec3::new(0.0, 0.0, 1.0), 1.0, 1.5).unwrap();
        assert!((t - d).norm() < 1e-15);
        assert_eq!(reflect(d, Vec3::new(0.0, 0.0, 1.0)), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn landing() {
        let r = Ray::new(Vec3::new(0.25, 0.75, 2.0), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(r.land(), Some((0.25, 0.75)));
        let up = Ray::new(Vec3::new(0.5, 0.5, 1.0), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(up.land(), None);
        let off = Ray::new(Vec3::new(1.5, 0.5, 1.0), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(off.land(), None);
    }
}
