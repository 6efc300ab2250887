use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Integer voxel coordinate. Signed so neighbors of boundary voxels can be
/// expressed before bounds checks.
pub type Voxel = [i64; 3];

/// A regular axis-aligned voxel lattice shared by the ground truth and the
/// robot's belief grid. Voxel `(i, j, k)` spans
/// `origin + res·[i, i+1) × [j, j+1) × [k, k+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub resolution: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
}

impl Lattice {
    pub fn new(resolution: f64, origin: Vec3, dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0 && resolution.is_finite(), "resolution must be positive");
        assert!(dims.iter().all(|&d| d >= 1), "dims must be >= 1");
        Self { resolution, origin, dims }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn in_bounds(&self, v: Voxel) -> bool {
        v[0] >= 0
            && v[1] >= 0
            && v[2] >= 0
            && (v[0] as usize) < self.dims[0]
            && (v[1] as usize) < self.dims[1]
            && (v[2] as usize) < self.dims[2]
    }

    /// True for voxels on the outermost layer of the lattice.
    pub fn is_boundary(&self, v: Voxel) -> bool {
        (0..3).any(|a| v[a] == 0 || v[a] as usize == self.dims[a] - 1)
    }

    #[inline]
    pub fn index(&self, v: Voxel) -> usize {
        debug_assert!(self.in_bounds(v));
        (v[2] as usize * self.dims[1] + v[1] as usize) * self.dims[0] + v[0] as usize
    }

    #[inline]
    pub fn checked_index(&self, v: Voxel) -> Option<usize> {
        self.in_bounds(v).then(|| self.index(v))
    }

    #[inline]
    pub fn voxel_at(&self, idx: usize) -> Voxel {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [(idx % nx) as i64, ((idx / nx) % ny) as i64, (idx / (nx * ny)) as i64]
    }

    /// Voxel containing `p` (may be out of bounds).
    #[inline]
    pub fn voxel_of(&self, p: Vec3) -> Voxel {
        let r = (p - self.origin) / self.resolution;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    #[inline]
    pub fn center(&self, v: Voxel) -> Vec3 {
        self.origin + Vec3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5) * self.resolution
    }

    pub fn center_of_index(&self, idx: usize) -> Vec3 {
        self.center(self.voxel_at(idx))
    }

    /// World-space extent of the lattice.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution
    }

    pub fn voxel_volume(&self) -> f64 {
        self.resolution.powi(3)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Walks the voxels pierced by the ray `origin + t·dir` for `t ∈ [0, max_t]`,
    /// in order, calling `visit(voxel, t_enter)`. `t_enter` is 0 for the
    /// starting voxel. Stops early on `ControlFlow::Break`, or on leaving the
    /// lattice. `dir` need not be unit length; `t` is in units of `dir`.
    pub fn traverse<B>(
        &self,
        origin: Vec3,
        dir: Vec3,
        max_t: f64,
        mut visit: impl FnMut(Voxel, f64) -> ControlFlow<B>,
    ) -> Option<B> {
        let mut v = self.voxel_of(origin);
        if !self.in_bounds(v) {
            return None;
        }
        let o = origin - self.origin;
        let d = dir.to_array();
        let p = o.to_array();
        let res = self.resolution;
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            if d[a] > 0.0 {
                step[a] = 1;
                t_max[a] = ((v[a] + 1) as f64 * res - p[a]) / d[a];
                t_delta[a] = res / d[a];
            } else if d[a] < 0.0 {
                step[a] = -1;
                t_max[a] = (v[a] as f64 * res - p[a]) / d[a];
                t_delta[a] = -res / d[a];
            }
        }
        let mut t = 0.0;
        loop {
            if let ControlFlow::Break(b) = visit(v, t) {
                return Some(b);
            }
            let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[a].max(0.0);
            if t > max_t || !t.is_finite() {
                return None;
            }
            v[a] += step[a];
            if !self.in_bounds(v) {
                return None;
            }
            t_max[a] += t_delta[a];
        }
    }

    /// Voxel offsets whose centers lie within `radius` of the origin voxel center.
    pub fn ball_offsets(&self, radius: f64) -> Vec<Voxel> {
        let r = (radius / self.resolution).floor() as i64;
        let lim = (radius / self.resolution).powi(2) + 1e-9;
        let mut out = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if ((dx * dx + dy * dy + dz * dz) as f64) <= lim {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// The 26 lattice neighbor offsets, in a fixed order.
pub const NEIGHBORS_26: [Voxel; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

pub const NEIGHBORS_6: [Voxel; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

#[inline]
pub fn offset(v: Voxel, d: Voxel) -> Voxel {
    [v[0] + d[0], v[1] + d[1], v[2] + d[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let l = Lattice::new(0.5, Vec3::new(-1.0, 2.0, 0.0), [4, 5, 6]);
        for idx in 0..l.len() {
            assert_eq!(l.index(l.voxel_at(idx)), idx);
        }
        assert_eq!(l.voxel_of(Vec3::new(-0.9, 2.1, 0.1)), [0, 0, 0]);
        assert_eq!(l.voxel_of(l.center([3, 4, 5])), [3, 4, 5]);
    }

    #[test]
    fn traverse_axis_ray() {
        let l = Lattice::new(1.0, Vec3::ZERO, [10, 3, 3]);
        let mut seen = Vec::new();
        l.traverse(Vec3::new(0.5, 1.5, 1.5), Vec3::X, 4.2, |v, t| {
            seen.push((v[0], t));
            ControlFlow::<()>::Continue(())
        });
        let xs: Vec<i64> = seen.iter().map(|s| s.0).collect();
        assert_eq!(xs, vec![0, 1, 2, 3, 4]);
        assert!((seen[1].1 - 0.5).abs() < 1e-12);
        assert!((seen[4].1 - 3.5).abs() < 1e-12);
    }

    #[test]
    fn traverse_diagonal_is_connected() {
        let l = Lattice::new(0.25, Vec3::ZERO, [40, 40, 40]);
        let dir = Vec3::new(0.3, -0.5, 0.81).normalized().unwrap();
        let mut prev: Option<Voxel> = None;
        l.traverse(Vec3::new(5.01, 5.02, 1.03), dir, 5.0, |v, _| {
            if let Some(p) = prev {
                let d: i64 = (0..3).map(|a| (v[a] - p[a]).abs()).sum();
                assert_eq!(d, 1, "face-connected steps");
            }
            prev = Some(v);
            ControlFlow::<()>::Continue(())
        });
    }

    #[test]
    fn neighbor_tables() {
        assert_eq!(NEIGHBORS_26.len(), 26);
        assert!(!NEIGHBORS_26.contains(&[0, 0, 0]));
        let l = Lattice::new(0.25, Vec3::ZERO, [3, 3, 3]);
        assert_eq!(l.ball_offsets(0.4).len(), 19);
    }
}
