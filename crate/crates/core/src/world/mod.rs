//! Ground-truth environment: a bounded voxel occupancy grid, its generators,
//! the on-disk grid format, and exact ray casting for the simulated sensor.

mod gen;
mod io;
pub mod lattice;

use std::collections::VecDeque;
use std::ops::ControlFlow;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
pub use gen::generate_world;
pub use io::{read_world, read_world_file, write_world, write_world_file};
pub use lattice::{Lattice, Voxel, NEIGHBORS_26, NEIGHBORS_6};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world spec: {key} {reason}")]
    InvalidSpec { key: &'static str, reason: String },
    #[error("ray origin {0:?} lies in an occupied voxel")]
    OriginOccupied(Vec3),
    #[error("ray origin {0:?} lies outside the world")]
    OriginOutside(Vec3),
    #[error("world file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorldKind {
    CorridorRooms,
    BranchingCave,
    EmptyBox,
    FromFile,
}

impl std::str::FromStr for WorldKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "corridor-rooms" => Ok(Self::CorridorRooms),
            "branching-cave" => Ok(Self::BranchingCave),
            "empty-box" => Ok(Self::EmptyBox),
            "from-file" => Ok(Self::FromFile),
            other => Err(format!(
                "unknown world kind '{other}' (expected corridor-rooms, branching-cave, empty-box, from-file)"
            )),
        }
    }
}

impl std::fmt::Display for WorldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CorridorRooms => "corridor-rooms",
            Self::BranchingCave => "branching-cave",
            Self::EmptyBox => "empty-box",
            Self::FromFile => "from-file",
        })
    }
}

/// Everything needed to reproduce a world bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub kind: WorldKind,
    pub seed: u64,
    /// Outer extent in meters, shell included.
    pub size: Vec3,
    pub resolution: f64,
    /// Robot spawn; generators pick one when absent.
    pub spawn: Option<Vec3>,
    pub file: Option<PathBuf>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            kind: WorldKind::CorridorRooms,
            seed: 0,
            size: Vec3::new(40.0, 40.0, 5.0),
            resolution: 0.25,
            spawn: None,
            file: None,
        }
    }
}

/// Result of a single ray cast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayHit {
    Hit { point: Vec3, range: f64, voxel: Voxel },
    Miss,
}

impl RayHit {
    pub fn range(&self) -> Option<f64> {
        match self {
            RayHit::Hit { range, .. } => Some(*range),
            RayHit::Miss => None,
        }
    }
}

/// The bounded environment V. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWorld {
    lattice: Lattice,
    occupied: Vec<bool>,
    spawn: Vec3,
}

impl GroundTruthWorld {
    /// Builds a world from raw occupancy; the boundary shell is forced occupied.
    pub fn from_occupancy(lattice: Lattice, mut occupied: Vec<bool>, spawn: Vec3) -> Self {
        assert_eq!(occupied.len(), lattice.len(), "occupancy size must match lattice");
        for (idx, o) in occupied.iter_mut().enumerate() {
            if lattice.is_boundary(lattice.voxel_at(idx)) {
                *o = true;
            }
        }
        Self { lattice, occupied, spawn }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn resolution(&self) -> f64 {
        self.lattice.resolution
    }

    pub fn spawn(&self) -> Vec3 {
        self.spawn
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    /// Out-of-bounds voxels count as occupied.
    #[inline]
    pub fn is_occupied(&self, v: Voxel) -> bool {
        self.lattice.checked_index(v).is_none_or(|i| self.occupied[i])
    }

    pub fn is_free_point(&self, p: Vec3) -> bool {
        !self.is_occupied(self.lattice.voxel_of(p))
    }

    pub fn count_free(&self) -> usize {
        self.occupied.iter().filter(|o| !**o).count()
    }

    pub fn count_occupied(&self) -> usize {
        self.occupied.len() - self.count_free()
    }

    /// First intersection of the ray with an occupied voxel boundary, by
    /// voxel traversal. `dir` must be unit length.
    pub fn raycast(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Result<RayHit, WorldError> {
        debug_assert!((dir.norm() - 1.0).abs() < 1e-9, "direction must be unit length");
        let start = self.lattice.voxel_of(origin);
        if !self.lattice.in_bounds(start) {
            return Err(WorldError::OriginOutside(origin));
        }
        if self.is_occupied(start) {
            return Err(WorldError::OriginOccupied(origin));
        }
        let hit = self.lattice.traverse(origin, dir, max_range, |v, t| {
            if self.occupied[self.lattice.index(v)] {
                ControlFlow::Break(RayHit::Hit { point: origin + dir * t, range: t, voxel: v })
            } else {
                ControlFlow::Continue(())
            }
        });
        Ok(hit.unwrap_or(RayHit::Miss))
    }

    /// Free voxels 6-connected to the spawn voxel. Free voxels outside this
    /// set form the residual region and are excluded from completion metrics.
    pub fn reachable_free(&self) -> Vec<bool> {
        flood_fill_free(&self.lattice, &self.occupied, self.lattice.voxel_of(self.spawn))
    }

    /// Centers of all occupied voxels, in index order.
    pub fn occupied_centers(&self) -> Vec<Vec3> {
        self.occupied.iter().enumerate().filter(|(_, o)| **o).map(|(i, _)| self.lattice.center_of_index(i)).collect()
    }
}

pub(crate) fn flood_fill_free(lattice: &Lattice, occupied: &[bool], seed: Voxel) -> Vec<bool> {
    let mut seen = vec![false; lattice.len()];
    let Some(s) = lattice.checked_index(seed) else { return seen };
    if occupied[s] {
        return seen;
    }
    seen[s] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(v) = queue.pop_front() {
        for d in NEIGHBORS_6 {
            let n = lattice::offset(v, d);
            if let Some(i) = lattice.checked_index(n) {
                if !occupied[i] && !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_box(n: usize) -> GroundTruthWorld {
        let l = Lattice::new(0.25, Vec3::ZERO, [n, n, n]);
        let c = l.extent() / 2.0;
        GroundTruthWorld::from_occupancy(l, vec![false; l.len()], c)
    }

    #[test]
    fn raycast_range_limit_and_wall_distance() {
        // 25 m box: far wall 12.5 m - 0.25 m shell away from the center
        let w = empty_box(100);
        let c = w.spawn();
        assert_eq!(w.raycast(c, Vec3::X, 10.0).unwrap(), RayHit::Miss);
        let hit = w.raycast(c, Vec3::X, 15.0).unwrap();
        let r = hit.range().unwrap();
        assert!((r - 12.25).abs() <= 0.125, "range {r}");
    }

    #[test]
    fn raycast_rejects_occupied_origin() {
        let w = empty_box(20);
        assert!(matches!(w.raycast(Vec3::splat(0.1), Vec3::X, 5.0), Err(WorldError::OriginOccupied(_))));
        assert!(matches!(w.raycast(Vec3::splat(-3.0), Vec3::X, 5.0), Err(WorldError::OriginOutside(_))));
    }

    #[test]
    fn shell_is_forced_occupied() {
        let w = empty_box(6);
        assert!(w.is_occupied([0, 3, 3]));
        assert!(w.is_occupied([5, 3, 3]));
        assert!(!w.is_occupied([3, 3, 3]));
        assert_eq!(w.count_free(), 4 * 4 * 4);
        assert_eq!(w.reachable_free().iter().filter(|r| **r).count(), 64);
    }
}
