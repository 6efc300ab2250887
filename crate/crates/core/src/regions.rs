//! Coverage polyhedra and distinctive exploration regions (DERs).
//!
//! A coverage region approximates the space faithfully observed from one
//! robot position. DERs are clusters of frontier points wrapped in convex
//! hulls and kept pairwise distinct under mutual visibility.

use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::geometry::{build_hull, fibonacci_sphere, ConvexPolyhedron, GeometryError, Segment, Vec3};
use crate::knowledge::{Cell, FrontierPoints, KnowledgeGrid};
use crate::world::Voxel;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRegion {
    pub id: u64,
    pub origin_pose: Vec3,
    pub hull: ConvexPolyhedron,
}

/// Casts `n_dirs` full-sphere rays from `pose` through the belief grid.
/// Anything not detected-free stops a ray; rays are clipped at
/// `zeta_coverage`. The hull of the endpoints and the pose is the region.
pub fn build_coverage_region(
    grid: &KnowledgeGrid,
    pose: Vec3,
    zeta_coverage: f64,
    n_dirs: usize,
    id: u64,
) -> Result<CoverageRegion, GeometryError> {
    build_coverage_region_with(grid, pose, zeta_coverage, &fibonacci_sphere(n_dirs), id)
}

pub fn build_coverage_region_with(
    grid: &KnowledgeGrid,
    pose: Vec3,
    zeta_coverage: f64,
    dirs: &[Vec3],
    id: u64,
) -> Result<CoverageRegion, GeometryError> {
    let l = grid.lattice();
    let mut pts = Vec::with_capacity(dirs.len() + 1);
    pts.push(pose);
    for d in dirs {
        let t = l
            .traverse(pose, *d, zeta_coverage, |v, t| {
                if grid.get(v) == Cell::Free {
                    ControlFlow::Continue(())
                } else {
                    ControlFlow::Break(t)
                }
            })
            .unwrap_or(zeta_coverage)
            .min(zeta_coverage);
        pts.push(pose + *d * t);
    }
    let hull = hull_or_inflated(&pts, grid.resolution())?;
    Ok(CoverageRegion { id, origin_pose: pose, hull })
}

/// Hull of `points`; if they are degenerate, hull of the points inflated by
/// `±pad` along each axis.
pub fn hull_or_inflated(points: &[Vec3], pad: f64) -> Result<ConvexPolyhedron, GeometryError> {
    match build_hull(points) {
        Ok(h) => Ok(h),
        Err(GeometryError::Degenerate(_)) | Err(GeometryError::TooFewPoints(_)) if !points.is_empty() => {
            let offs = [Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y, Vec3::Z, -Vec3::Z];
            let inflated: Vec<Vec3> = points.iter().flat_map(|p| offs.iter().map(move |o| *p + *o * pad)).collect();
            build_hull(&inflated)
        }
        Err(e) => Err(e),
    }
}

/// Single-linkage clusters under distance `<= d_cluster`. Each cluster lists
/// point indices ascending; clusters are ordered by their first index.
/// Clusters smaller than `min_size` are dropped.
pub fn cluster_frontier(points: &[Vec3], d_cluster: f64, min_size: usize) -> Vec<Vec<usize>> {
    assert!(d_cluster > 0.0, "d_cluster must be positive");
    let key = |p: Vec3| -> Voxel {
        [(p.x / d_cluster).floor() as i64, (p.y / d_cluster).floor() as i64, (p.z / d_cluster).floor() as i64]
    };
    let mut buckets: HashMap<Voxel, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(*p)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let d2 = d_cluster * d_cluster;
    for (i, p) in points.iter().enumerate() {
        let k = key(*p);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(b) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &j in b {
                        if j > i && (points[j] - *p).norm_sq() <= d2 {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri.max(rj)] = ri.min(rj);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() >= min_size).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerState {
    Active,
    Consumed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistinctiveRegion {
    pub id: u64,
    pub hull: ConvexPolyhedron,
    pub members: Vec<Vec3>,
    /// Downsampling cells of `members`, parallel to it.
    pub member_cells: Vec<Voxel>,
    pub created_at: f64,
    pub state: DerState,
    /// Bumped whenever the hull changes.
    pub version: u64,
}

impl DistinctiveRegion {
    pub fn is_active(&self) -> bool {
        self.state == DerState::Active
    }

    pub fn centroid(&self) -> Vec3 {
        self.hull.centroid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerParams {
    pub ds: f64,
    pub d_cluster: f64,
    pub min_cluster_size: usize,
    pub r_near: f64,
    /// Fraction of centroid-to-vertex segments that must be clear for two
    /// regions to count as mutually visible.
    pub visibility_fraction: f64,
}

/// Whether a segment crosses no detected-occupied voxel and no coverage hull.
pub fn segment_clear(grid: &KnowledgeGrid, coverage: &[&ConvexPolyhedron], seg: &Segment) -> bool {
    let blocked = grid
        .lattice()
        .traverse(seg.a, seg.b - seg.a, 1.0, |v, _| {
            if grid.get(v) == Cell::Occupied {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .is_some();
    !blocked && !coverage.iter().any(|h| h.segment_intersects(seg, 0.0))
}

/// Segments from each centroid to every vertex of the other hull must be
/// clear; with `fraction < 1` only that share of them.
pub fn has_mutual_visibility(
    a: &ConvexPolyhedron,
    b: &ConvexPolyhedron,
    grid: &KnowledgeGrid,
    coverage: &[&ConvexPolyhedron],
    fraction: f64,
) -> bool {
    let segs: Vec<Segment> = b
        .vertices()
        .iter()
        .map(|v| Segment::new(a.centroid(), *v))
        .chain(a.vertices().iter().map(|v| Segment::new(b.centroid(), *v)))
        .collect();
    let total = segs.len();
    let need = ((fraction.clamp(0.0, 1.0) * total as f64) - 1e-9).ceil() as usize;
    let allowed_blocked = total - need;
    let mut blocked = 0;
    for s in &segs {
        if !segment_clear(grid, coverage, s) {
            blocked += 1;
            if blocked > allowed_blocked {
                return false;
            }
        }
    }
    true
}

/// One DER update pass.
///
/// Existing active regions keep only members still on the frontier; those
/// left with fewer than `min_cluster_size` members, or whose centroid has
/// become covered, are consumed, the rest are re-hulled. Unclaimed frontier
/// points are clustered into candidate regions, bisecting any cluster whose
/// centroid falls inside coverage.
/// The stream of refreshed and candidate regions then goes through the
/// merge pass: each is merged into the first already-accepted region within
/// `r_near` that it sees mutually, otherwise accepted as distinct. Merged
/// regions keep the older id. Repeated calls converge to a fixpoint.
pub fn update_ders(
    frontier: &FrontierPoints,
    existing: &[DistinctiveRegion],
    grid: &KnowledgeGrid,
    coverage: &[&ConvexPolyhedron],
    params: &DerParams,
    now: f64,
    next_id: &mut u64,
) -> Vec<DistinctiveRegion> {
    let pad = params.ds / 2.0;
    let index: HashMap<Voxel, usize> = frontier.cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut claimed = vec![false; frontier.len()];
    let mut out: Vec<DistinctiveRegion> = Vec::new();
    let mut stream: Vec<DistinctiveRegion> = Vec::new();

    let covered = |c: Vec3| coverage.iter().any(|h| h.contains(c, 0.0));
    for der in existing {
        if !der.is_active() {
            continue;
        }
        let kept: Vec<usize> =
            der.member_cells.iter().filter_map(|c| index.get(c).copied()).filter(|i| !claimed[*i]).collect();
        let mut d = der.clone();
        if kept.len() < params.min_cluster_size {
            d.state = DerState::Consumed;
            out.push(d);
            continue;
        }
        let members: Vec<Vec3> = kept.iter().map(|i| frontier.points[*i]).collect();
        if members != der.members {
            match hull_or_inflated(&members, pad) {
                Ok(h) => {
                    d.hull = h;
                    d.version += 1;
                    d.members = members;
                    d.member_cells = kept.iter().map(|i| frontier.cells[*i]).collect();
                }
                Err(_) => {
                    d.state = DerState::Consumed;
                    out.push(d);
                    continue;
                }
            }
        }
        // a covered centroid cannot serve as a destination; release the
        // members so they are re-clustered below
        if covered(d.centroid()) {
            d.state = DerState::Consumed;
            out.push(d);
            continue;
        }
        for i in kept {
            claimed[i] = true;
        }
        stream.push(d);
    }

    let free_idx: Vec<usize> = (0..frontier.len()).filter(|i| !claimed[*i]).collect();
    let free_pts: Vec<Vec3> = free_idx.iter().map(|i| frontier.points[*i]).collect();
    let mut pieces = Vec::new();
    for cluster in cluster_frontier(&free_pts, params.d_cluster, params.min_cluster_size) {
        split_uncovered(cluster, &free_pts, pad, params.min_cluster_size, &covered, &mut pieces);
    }
    for (cluster, hull) in pieces {
        stream.push(DistinctiveRegion {
            id: *next_id,
            hull,
            members: cluster.iter().map(|k| free_pts[*k]).collect(),
            member_cells: cluster.iter().map(|k| frontier.cells[free_idx[*k]]).collect(),
            created_at: now,
            state: DerState::Active,
            version: 0,
        });
        *next_id += 1;
    }

    let mut accepted: Vec<DistinctiveRegion> = Vec::new();
    for region in stream {
        let target = accepted.iter().position(|e| {
            e.centroid().distance(region.centroid()) <= params.r_near
                && has_mutual_visibility(&e.hull, &region.hull, grid, coverage, params.visibility_fraction)
        });
        match target {
            Some(k) => {
                let e = &mut accepted[k];
                if let Some(merged) = merge_regions(e, &region) {
                    *e = merged;
                } else {
                    accepted.push(region);
                }
            }
            None => accepted.push(region),
        }
    }
    out.extend(accepted);
    out.sort_by_key(|d| d.id);
    out
}

/// Hulls `cluster`; while the hull centroid lies in coverage, bisects at the
/// median of the longest extent. Pieces that drop below `min_size` are
/// discarded.
fn split_uncovered(
    cluster: Vec<usize>,
    pts: &[Vec3],
    pad: f64,
    min_size: usize,
    covered: &dyn Fn(Vec3) -> bool,
    out: &mut Vec<(Vec<usize>, ConvexPolyhedron)>,
) {
    if cluster.len() < min_size.max(1) {
        return;
    }
    let members: Vec<Vec3> = cluster.iter().map(|k| pts[*k]).collect();
    let Ok(hull) = hull_or_inflated(&members, pad) else { return };
    if !covered(hull.centroid()) {
        out.push((cluster, hull));
        return;
    }
    if cluster.len() < 2 * min_size.max(1) {
        return;
    }
    let e = hull.aabb().extent().to_array();
    let axis = (0..3).max_by(|a, b| e[*a].total_cmp(&e[*b])).unwrap_or(0);
    let mut sorted = cluster;
    sorted.sort_by(|a, b| pts[*a].to_array()[axis].total_cmp(&pts[*b].to_array()[axis]).then(a.cmp(b)));
    let right = sorted.split_off(sorted.len() / 2);
    let mut left = sorted;
    left.sort_unstable();
    let mut right = right;
    right.sort_unstable();
    split_uncovered(left, pts, pad, min_size, covered, out);
    split_uncovered(right, pts, pad, min_size, covered, out);
}

/// Hull of the union of both vertex sets, union of members; keeps `a`'s id.
pub fn merge_regions(a: &DistinctiveRegion, b: &DistinctiveRegion) -> Option<DistinctiveRegion> {
    let pts: Vec<Vec3> = a.hull.vertices().iter().chain(b.hull.vertices()).copied().collect();
    let hull = build_hull(&pts).ok()?;
    let mut members = a.members.clone();
    members.extend_from_slice(&b.members);
    let mut member_cells = a.member_cells.clone();
    member_cells.extend_from_slice(&b.member_cells);
    Some(DistinctiveRegion {
        id: a.id,
        hull,
        members,
        member_cells,
        created_at: a.created_at.min(b.created_at),
        state: DerState::Active,
        version: a.version.max(b.version) + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(c: Vec3, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|i| {
                let f = i as f64;
                c + Vec3::new((f * 0.37).sin(), (f * 0.71).cos(), (f * 0.13).sin()) * 0.5
            })
            .collect()
    }

    #[test]
    fn cluster_separation_and_linkage() {
        let mut pts = blob(Vec3::ZERO, 20);
        pts.extend(blob(Vec3::new(5.0, 0.0, 0.0), 20));
        assert_eq!(cluster_frontier(&pts, 1.0, 5).len(), 2);
        assert_eq!(cluster_frontier(&pts, 6.0, 5).len(), 1);
        assert_eq!(cluster_frontier(&pts, 1.0, 25).len(), 0);
    }

    #[test]
    fn inflation_rescues_flat_sets() {
        let flat: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, (i * i) as f64 * 0.1, 2.0)).collect();
        assert!(build_hull(&flat).is_err());
        let h = hull_or_inflated(&flat, 0.25).unwrap();
        assert!(flat.iter().all(|p| h.contains(*p, 1e-6)));
        assert!(h.volume() > 0.0);
    }
}
