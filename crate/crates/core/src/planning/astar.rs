use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{PlanError, PlannerParams};
use crate::geometry::{Segment, Vec3};
use crate::knowledge::{Cell, KnowledgeGrid};
use crate::world::lattice::offset;
use crate::world::{Voxel, NEIGHBORS_26};

/// States farther than `radius` from the axis segment are never expanded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderConstraint {
    pub axis: Segment,
    pub radius: f64,
}

impl CylinderConstraint {
    pub fn new(axis: Segment, radius: f64) -> Self {
        assert!(radius > 0.0, "cylinder radius must be positive");
        Self { axis, radius }
    }

    /// Radius proportional to the axis length, clamped to `[r_min, r_max]`.
    pub fn between(a: Vec3, b: Vec3, p: &PlannerParams) -> Self {
        let r = (p.ratio_r * a.distance(b)).clamp(p.r_min, p.r_max);
        Self::new(Segment::new(a, b), r)
    }

    #[inline]
    pub fn contains(&self, q: Vec3) -> bool {
        self.axis.distance_to(q) <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstarOptions {
    /// Success once a voxel center is this close to the goal; never below
    /// half a voxel diagonal so the goal set is nonempty.
    pub goal_tol: f64,
    /// Treat voxels within the robot radius of detected obstacles as blocked,
    /// except near the start and goal so the robot can leave tight spots.
    pub inflate: bool,
    pub max_expansions: usize,
}

impl AstarOptions {
    pub fn new(goal_tol: f64) -> Self {
        Self { goal_tol, inflate: true, max_expansions: 2_000_000 }
    }

    pub fn exact(goal_tol: f64) -> Self {
        Self { goal_tol, inflate: false, max_expansions: usize::MAX }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Exact start, voxel centers, exact goal.
    pub waypoints: Vec<Vec3>,
    /// Length of the waypoint polyline.
    pub cost: f64,
    /// Sum of lattice step costs between voxel centers.
    pub lattice_cost: f64,
    pub expansions: usize,
}

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    // min-heap on (f, idx)
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.idx.cmp(&self.idx))
    }
}

/// Effective goal radius used by the search.
pub fn goal_radius(grid: &KnowledgeGrid, goal_tol: f64) -> f64 {
    goal_tol.max(grid.resolution() * 3f64.sqrt() / 2.0 + 1e-9)
}

/// Whether the straight move between neighboring voxels `a` and `b` avoids
/// detected obstacles: no voxel of their bounding box is occupied.
pub fn move_clear(grid: &KnowledgeGrid, a: Voxel, b: Voxel) -> bool {
    let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
    let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                if grid.get([x, y, z]) == Cell::Occupied {
                    return false;
                }
            }
        }
    }
    true
}

/// 26-connected A* over the belief lattice with Euclidean step costs.
///
/// Unknown and detected-free voxels are traversable; detected-occupied
/// voxels, the outermost lattice layer, and (when given) voxels outside the
/// cylinder are blocked. Diagonal moves may not cut the corner of an
/// occupied voxel, so every path segment crosses only non-occupied voxels.
pub fn cylinder_astar(
    grid: &KnowledgeGrid,
    start: Vec3,
    goal: Vec3,
    cyl: Option<&CylinderConstraint>,
    opts: &AstarOptions,
) -> Result<PathResult, PlanError> {
    let l = grid.lattice();
    let sv = l.voxel_of(start);
    if !l.in_bounds(sv) || grid.get(sv) == Cell::Occupied {
        return Err(PlanError::StartBlocked);
    }
    let res = l.resolution;
    let goal_r = goal_radius(grid, opts.goal_tol);
    let escape = grid.robot_radius() + res;
    let h = |c: Vec3| (c.distance(goal) - goal_r).max(0.0);
    let step_cost: [f64; 4] = [0.0, res, res * 2f64.sqrt(), res * 3f64.sqrt()];

    let passable = |v: Voxel| -> bool {
        if !l.in_bounds(v) || l.is_boundary(v) || grid.get(v) == Cell::Occupied {
            return false;
        }
        let c = l.center(v);
        if let Some(cy) = cyl {
            if !cy.contains(c) {
                return false;
            }
        }
        if opts.inflate && grid.is_inflated(v) && c.distance(start) > escape && c.distance(goal) > escape {
            return false;
        }
        true
    };

    // g, parent index, closed
    let mut state: HashMap<usize, (f64, usize, bool)> = HashMap::new();
    let mut open = BinaryHeap::new();
    let s_idx = l.index(sv);
    state.insert(s_idx, (0.0, usize::MAX, false));
    open.push(Open { f: h(l.center(sv)), idx: s_idx });
    let mut expansions = 0;

    while let Some(Open { idx, .. }) = open.pop() {
        let (g, _, closed) = state[&idx];
        if closed {
            continue;
        }
        state.get_mut(&idx).unwrap().2 = true;
        let v = l.voxel_at(idx);
        let c = l.center(v);
        if c.distance(goal) <= goal_r {
            return Ok(reconstruct(grid, &state, idx, start, goal, g, expansions));
        }
        expansions += 1;
        if expansions > opts.max_expansions {
            break;
        }
        for d in NEIGHBORS_26 {
            let n = offset(v, d);
            let k = (d[0] != 0) as usize + (d[1] != 0) as usize + (d[2] != 0) as usize;
            if !passable(n) || (k > 1 && !move_clear(grid, v, n)) {
                continue;
            }
            let ni = l.index(n);
            let ng = g + step_cost[k];
            match state.get_mut(&ni) {
                Some(e) if e.2 || e.0 <= ng => continue,
                Some(e) => *e = (ng, idx, false),
                None => {
                    state.insert(ni, (ng, idx, false));
                }
            }
            open.push(Open { f: ng + h(l.center(n)), idx: ni });
        }
    }
    Err(PlanError::NoPath)
}

fn reconstruct(
    grid: &KnowledgeGrid,
    state: &HashMap<usize, (f64, usize, bool)>,
    end: usize,
    start: Vec3,
    goal: Vec3,
    lattice_cost: f64,
    expansions: usize,
) -> PathResult {
    let l = grid.lattice();
    let mut chain = vec![end];
    let mut cur = end;
    while state[&cur].1 != usize::MAX {
        cur = state[&cur].1;
        chain.push(cur);
    }
    chain.reverse();
    let mut waypoints = Vec::with_capacity(chain.len() + 1);
    waypoints.push(start);
    waypoints.extend(chain.iter().skip(1).map(|i| l.center_of_index(*i)));
    // The exact goal is appended only when the last hop to it is clear.
    let last = l.voxel_at(end);
    let gv = l.voxel_of(goal);
    if (0..3).all(|i| (gv[i] - last[i]).abs() <= 1) && l.in_bounds(gv) && move_clear(grid, last, gv) {
        waypoints.push(goal);
    }
    waypoints.dedup();
    PathResult { cost: polyline_length(&waypoints), waypoints, lattice_cost, expansions }
}

/// Whether no segment of the polyline crosses a voxel believed occupied.
pub fn polyline_clear(grid: &KnowledgeGrid, pts: &[Vec3]) -> bool {
    let l = grid.lattice();
    pts.windows(2).all(|w| {
        l.traverse(w[0], w[1] - w[0], 1.0, |v, _| {
            if grid.get(v) == Cell::Occupied {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .is_none()
    })
}

pub fn polyline_length(pts: &[Vec3]) -> f64 {
    pts.windows(2).map(|w| w[0].distance(w[1])).sum()
}
