//! 3D vector and convex-polyhedron primitives.
//!
//! Everything here is plain value data: hulls are immutable once built and
//! every query is reentrant.

mod gjk;
mod hull;

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gjk::{polys_distance, polys_intersect};
pub use hull::{build_hull, ConvexPolyhedron, Plane};

/// Orientation epsilon, relative to the extent of the input point set.
pub const HULL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("need at least 4 points to build a hull, got {0}")]
    TooFewPoints(usize),
    #[error("point set is degenerate ({0}); no 3D hull exists")]
    Degenerate(&'static str),
    #[error("non-finite coordinate in input point {0}")]
    NonFinite(usize),
}

/// A point or direction in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-12 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Lexicographic total order, used to canonicalize endpoint pairs.
    pub fn lex_cmp(&self, o: &Vec3) -> std::cmp::Ordering {
        self.x.total_cmp(&o.x).then(self.y.total_cmp(&o.y)).then(self.z.total_cmp(&o.z))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A directed line segment between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec3,
    pub b: Vec3,
}

impl Segment {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Euclidean distance from `q` to the closest point of the segment.
    pub fn distance_to(&self, q: Vec3) -> f64 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        if len_sq < 1e-18 {
            return q.distance(self.a);
        }
        let t = ((q - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        q.distance(self.a + ab * t)
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Option<Aabb> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in it {
            bb.min = bb.min.min(*p);
            bb.max = bb.max.max(*p);
        }
        Some(bb)
    }

    pub fn expanded(&self, m: f64) -> Aabb {
        Aabb { min: self.min - Vec3::splat(m), max: self.max + Vec3::splat(m) }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}

/// `n` near-uniform unit directions on the full sphere (spherical Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    fibonacci_band(n, -1.0, 1.0, 360.0)
}

/// Spherical Fibonacci lattice restricted to the band `z ∈ [z_lo, z_hi]`
/// (sines of elevation) and to an azimuth window of `fov_h_deg` centred on +x.
///
/// Points stay equal-area within the band, so the sample is even over the
/// clipped field of view rather than thinned by rejection.
pub fn fibonacci_band(n: usize, z_lo: f64, z_hi: f64, fov_h_deg: f64) -> Vec<Vec3> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let fov = fov_h_deg.clamp(0.0, 360.0).to_radians();
    (0..n)
        .map(|i| {
            let f = (i as f64 + 0.5) / n as f64;
            let z = z_lo + (z_hi - z_lo) * f;
            let frac = (i as f64 / golden).fract();
            let az =
                if fov >= std::f64::consts::TAU - 1e-12 { std::f64::consts::TAU * frac } else { fov * (frac - 0.5) };
            let r = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(r * az.cos(), r * az.sin(), z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance() {
        let s = Segment::new(Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0));
        assert!((s.distance_to(Vec3::new(5.0, 3.0, 0.0)) - 3.0).abs() < 1e-12);
        assert!((s.distance_to(Vec3::new(-4.0, 3.0, 0.0)) - 5.0).abs() < 1e-12);
        assert!((s.distance_to(Vec3::new(13.0, 0.0, 4.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn fibonacci_band_respects_limits() {
        let lo = (-15f64).to_radians().sin();
        let hi = 15f64.to_radians().sin();
        let dirs = fibonacci_band(1000, lo, hi, 360.0);
        assert_eq!(dirs.len(), 1000);
        for d in &dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
            let el = d.z.asin().to_degrees();
            assert!((-15.0 - 1e-9..=15.0 + 1e-9).contains(&el));
        }
        let narrow = fibonacci_band(500, -0.1, 0.1, 90.0);
        for d in &narrow {
            assert!(d.y.atan2(d.x).to_degrees().abs() <= 45.0 + 1e-9);
        }
    }

    #[test]
    fn fibonacci_sphere_is_balanced() {
        let dirs = fibonacci_sphere(512);
        let mean = dirs.iter().fold(Vec3::ZERO, |a, d| a + *d) / 512.0;
        assert!(mean.norm() < 1e-2);
    }
}
