use std::collections::BTreeSet;

use super::{cylinder_astar, PathResult, PlanError, PlannerParams};
use crate::geometry::Vec3;
use crate::knowledge::{Cell, KnowledgeGrid};
use crate::world::lattice::offset;
use crate::world::NEIGHBORS_6;

/// Classical frontier voxels: detected-free with an unknown face neighbor
/// inside the world interior. Indices ascending.
pub fn raw_frontier_voxels(grid: &KnowledgeGrid) -> Vec<usize> {
    let l = grid.lattice();
    grid.cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == Cell::Free)
        .filter(|(i, _)| {
            let v = l.voxel_at(*i);
            NEIGHBORS_6.iter().any(|d| {
                let n = offset(v, *d);
                l.in_bounds(n) && !l.is_boundary(n) && grid.get(n) == Cell::Unknown
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Center of the raw frontier voxel nearest to `pose`, ties by index.
pub fn baseline_nearest_frontier(grid: &KnowledgeGrid, pose: Vec3) -> Result<Vec3, PlanError> {
    let l = grid.lattice();
    raw_frontier_voxels(grid)
        .into_iter()
        .map(|i| l.center_of_index(i))
        .min_by(|a, b| a.distance(pose).total_cmp(&b.distance(pose)))
        .ok_or(PlanError::NoFrontier)
}

/// Greedy nearest-frontier explorer. Targets that prove unreachable, or that
/// stay frontier after being reached, are never chosen again.
#[derive(Debug, Clone, Default)]
pub struct BaselinePlanner {
    excluded: BTreeSet<usize>,
}

impl BaselinePlanner {
    /// Max A* attempts per decision before giving up.
    const TRIES: usize = 24;

    pub fn exclude(&mut self, idx: usize) {
        self.excluded.insert(idx);
    }

    /// Target voxel index and the unconstrained lattice path to it.
    pub fn plan(
        &mut self,
        grid: &KnowledgeGrid,
        pose: Vec3,
        params: &PlannerParams,
    ) -> Result<(usize, PathResult), PlanError> {
        let l = grid.lattice();
        let mut cands: Vec<(f64, usize)> = raw_frontier_voxels(grid)
            .into_iter()
            .filter(|i| !self.excluded.contains(i))
            .map(|i| (l.center_of_index(i).distance(pose), i))
            .collect();
        if cands.is_empty() {
            return Err(PlanError::NoFrontier);
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, i) in cands.into_iter().take(Self::TRIES) {
            match cylinder_astar(grid, pose, l.center_of_index(i), None, &params.astar_options()) {
                Ok(path) => return Ok((i, path)),
                Err(PlanError::StartBlocked) => return Err(PlanError::StartBlocked),
                Err(_) => {
                    self.excluded.insert(i);
                }
            }
        }
        Err(PlanError::NoPath)
    }
}
