//! The robot's belief grid: simulated scans, their integration into a
//! ternary voxel map, and raw frontier extraction against the coverage set.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::geometry::{fibonacci_band, ConvexPolyhedron, Vec3};
use crate::world::lattice::offset;
use crate::world::{GroundTruthWorld, Lattice, RayHit, Voxel, WorldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Range within which space counts as detected, meters.
    pub zeta_detect: f64,
    /// Range within which observation counts as faithful coverage, meters.
    pub zeta_coverage: f64,
    /// Horizontal field of view, degrees, centred on +x.
    pub fov_h: f64,
    /// Vertical field of view, degrees, symmetric about the horizontal plane.
    pub fov_v: f64,
    pub n_rays: usize,
    /// Scans per simulated second.
    pub scan_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { zeta_detect: 15.0, zeta_coverage: 10.0, fov_h: 360.0, fov_v: 30.0, n_rays: 6000, scan_rate: 2.0 }
    }
}

impl SensorConfig {
    /// Returns the offending key and reason on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.zeta_coverage > 0.0 && self.zeta_coverage < self.zeta_detect && self.zeta_detect.is_finite()) {
            return Err((
                "sensor.zeta_coverage",
                format!("need 0 < zeta_coverage < zeta_detect, got {} and {}", self.zeta_coverage, self.zeta_detect),
            ));
        }
        if !(self.fov_h > 0.0 && self.fov_h <= 360.0) {
            return Err(("sensor.fov_h", format!("must be in (0, 360], got {}", self.fov_h)));
        }
        if !(self.fov_v > 0.0 && self.fov_v < 180.0) {
            return Err(("sensor.fov_v", format!("must be in (0, 180), got {}", self.fov_v)));
        }
        if self.n_rays == 0 {
            return Err(("sensor.n_rays", "must be at least 1".into()));
        }
        if !(self.scan_rate > 0.0 && self.scan_rate.is_finite()) {
            return Err(("sensor.scan_rate", format!("must be positive, got {}", self.scan_rate)));
        }
        Ok(())
    }

    /// The fixed ray pattern of one scan.
    pub fn directions(&self) -> Vec<Vec3> {
        let s = (self.fov_v / 2.0).to_radians().sin();
        fibonacci_band(self.n_rays, -s, s, self.fov_h)
    }
}

/// One sensor sweep: ray directions paired with their ground-truth returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub origin: Vec3,
    pub max_range: f64,
    pub rays: Vec<(Vec3, RayHit)>,
}

pub fn simulate_scan(world: &GroundTruthWorld, pose: Vec3, cfg: &SensorConfig) -> Result<Scan, WorldError> {
    simulate_scan_with(world, pose, cfg.zeta_detect, &cfg.directions())
}

/// Same as [`simulate_scan`] with a precomputed direction set.
pub fn simulate_scan_with(
    world: &GroundTruthWorld,
    pose: Vec3,
    max_range: f64,
    dirs: &[Vec3],
) -> Result<Scan, WorldError> {
    let rays =
        dirs.iter().map(|d| world.raycast(pose, *d, max_range).map(|h| (*d, h))).collect::<Result<Vec<_>, _>>()?;
    Ok(Scan { origin: pose, max_range, rays })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Cell {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

/// Ternary belief over the world lattice. Cells only ever leave `Unknown`.
///
/// Also maintains, per voxel, the number of detected-occupied voxels within
/// the robot radius, so inflated-obstacle queries are O(1).
#[derive(Debug, Clone)]
pub struct KnowledgeGrid {
    lattice: Lattice,
    cells: Vec<Cell>,
    near_obstacles: Vec<u16>,
    inflation: Vec<Voxel>,
    robot_radius: f64,
    n_free: usize,
    n_occupied: usize,
}

impl KnowledgeGrid {
    pub fn new(lattice: Lattice, robot_radius: f64) -> Self {
        let inflation = if robot_radius > 0.0 { lattice.ball_offsets(robot_radius) } else { vec![[0, 0, 0]] };
        Self {
            lattice,
            cells: vec![Cell::Unknown; lattice.len()],
            near_obstacles: vec![0; lattice.len()],
            inflation,
            robot_radius,
            n_free: 0,
            n_occupied: 0,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn resolution(&self) -> f64 {
        self.lattice.resolution
    }

    pub fn robot_radius(&self) -> f64 {
        self.robot_radius
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Out-of-bounds voxels read as occupied.
    #[inline]
    pub fn get(&self, v: Voxel) -> Cell {
        self.lattice.checked_index(v).map_or(Cell::Occupied, |i| self.cells[i])
    }

    #[inline]
    pub fn at_point(&self, p: Vec3) -> Cell {
        self.get(self.lattice.voxel_of(p))
    }

    /// True when a detected-occupied voxel lies within the robot radius.
    #[inline]
    pub fn is_inflated(&self, v: Voxel) -> bool {
        self.lattice.checked_index(v).is_none_or(|i| self.near_obstacles[i] > 0)
    }

    /// Sets an unknown cell; returns whether anything changed.
    pub fn set(&mut self, v: Voxel, c: Cell) -> bool {
        let Some(i) = self.lattice.checked_index(v) else { return false };
        if self.cells[i] != Cell::Unknown || c == Cell::Unknown {
            return false;
        }
        self.cells[i] = c;
        match c {
            Cell::Free => self.n_free += 1,
            Cell::Occupied => {
                self.n_occupied += 1;
                for d in &self.inflation {
                    if let Some(j) = self.lattice.checked_index(offset(v, *d)) {
                        self.near_obstacles[j] = self.near_obstacles[j].saturating_add(1);
                    }
                }
            }
            Cell::Unknown => unreachable!(),
        }
        true
    }

    pub fn free_count(&self) -> usize {
        self.n_free
    }

    pub fn occupied_count(&self) -> usize {
        self.n_occupied
    }

    pub fn detected_count(&self) -> usize {
        self.n_free + self.n_occupied
    }

    /// Detected volume in m³, free and occupied voxels alike.
    pub fn detected_volume(&self) -> f64 {
        self.detected_count() as f64 * self.lattice.voxel_volume()
    }

    /// Marks traversed voxels free and hit voxels occupied. Returns the number
    /// of newly detected voxels.
    pub fn integrate_scan(&mut self, scan: &Scan) -> usize {
        let mut fresh = 0;
        for (dir, hit) in &scan.rays {
            let (max_t, stop) = match hit {
                RayHit::Hit { range, voxel, .. } => (*range, Some(*voxel)),
                RayHit::Miss => (scan.max_range, None),
            };
            let lattice = self.lattice;
            lattice.traverse(scan.origin, *dir, max_t, |v, _| {
                if Some(v) == stop {
                    fresh += usize::from(self.set(v, Cell::Occupied));
                    ControlFlow::Break(())
                } else {
                    fresh += usize::from(self.set(v, Cell::Free));
                    ControlFlow::Continue(())
                }
            });
        }
        fresh
    }
}

/// Union of rasterized coverage hulls over the lattice. A voxel is covered
/// when its center lies within `tol` of some hull.
#[derive(Debug, Clone)]
pub struct CoverageMask {
    lattice: Lattice,
    covered: Vec<bool>,
    tol: f64,
}

impl CoverageMask {
    pub fn new(lattice: Lattice, tol: f64) -> Self {
        Self { lattice, covered: vec![false; lattice.len()], tol }
    }

    pub fn from_hulls(lattice: Lattice, tol: f64, hulls: &[ConvexPolyhedron]) -> Self {
        let mut m = Self::new(lattice, tol);
        for h in hulls {
            m.add_hull(h);
        }
        m
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    #[inline]
    pub fn is_covered(&self, idx: usize) -> bool {
        self.covered[idx]
    }

    pub fn add_hull(&mut self, hull: &ConvexPolyhedron) {
        let l = &self.lattice;
        let bb = hull.aabb().expanded(self.tol);
        let lo = l.voxel_of(bb.min);
        let hi = l.voxel_of(bb.max);
        let r = l.resolution;
        for z in lo[2].max(0)..=hi[2].min(l.dims[2] as i64 - 1) {
            for y in lo[1].max(0)..=hi[1].min(l.dims[1] as i64 - 1) {
                let c = l.center([0, y, z]);
                let Some((x0, x1)) = hull.x_interval(c.y, c.z, self.tol) else { continue };
                // voxel centers x = origin + (i + 0.5) r within [x0, x1]
                let i0 = ((x0 - l.origin.x) / r - 0.5).ceil().max(0.0) as i64;
                let i1 = ((x1 - l.origin.x) / r - 0.5).floor().min(l.dims[0] as f64 - 1.0) as i64;
                if i1 < i0 {
                    continue;
                }
                let base = l.index([0, y, z]);
                for i in i0..=i1 {
                    self.covered[base + i as usize] = true;
                }
            }
        }
    }
}

/// Downsampled frontier points. `cells[i]` is the downsampling cell of
/// `points[i]`, the stable key used to track membership across updates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontierPoints {
    pub points: Vec<Vec3>,
    pub cells: Vec<Voxel>,
    pub ds: f64,
}

impl FrontierPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Detected-free voxels outside every coverage hull (tolerance half a voxel),
/// one representative per `ds` cell.
pub fn extract_frontier_points(grid: &KnowledgeGrid, coverage: &[ConvexPolyhedron], ds: f64) -> FrontierPoints {
    let mask = CoverageMask::from_hulls(*grid.lattice(), grid.resolution() / 2.0, coverage);
    extract_frontier_masked(grid, &mask, coverage, ds)
}

/// As [`extract_frontier_points`], reusing an incrementally maintained mask
/// that must cover the union of `coverage`.
pub fn extract_frontier_masked(
    grid: &KnowledgeGrid,
    mask: &CoverageMask,
    coverage: &[ConvexPolyhedron],
    ds: f64,
) -> FrontierPoints {
    let l = grid.lattice();
    assert!(ds >= l.resolution - 1e-12, "ds must be at least the grid resolution");
    let tol = mask.tol();
    let mut by_cell: BTreeMap<Voxel, Vec<(f64, usize)>> = BTreeMap::new();
    for (idx, c) in grid.cells().iter().enumerate() {
        if *c != Cell::Free || mask.is_covered(idx) {
            continue;
        }
        let p = l.center_of_index(idx);
        let rel = (p - l.origin) / ds;
        let key = [rel.x.floor() as i64, rel.y.floor() as i64, rel.z.floor() as i64];
        let cell_center = l.origin + Vec3::new(key[0] as f64 + 0.5, key[1] as f64 + 0.5, key[2] as f64 + 0.5) * ds;
        by_cell.entry(key).or_default().push((p.distance(cell_center), idx));
    }
    let mut out = FrontierPoints { points: Vec::new(), cells: Vec::new(), ds };
    for (key, mut cands) in by_cell {
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // the exact test guards against rasterization rounding
        let pick =
            cands.iter().map(|(_, i)| l.center_of_index(*i)).find(|p| !coverage.iter().any(|h| h.contains(*p, tol)));
        if let Some(p) = pick {
            out.points.push(p);
            out.cells.push(key);
        }
    }
    out
}
