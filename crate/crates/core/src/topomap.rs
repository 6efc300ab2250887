//! Sparse topological map over coverage regions and distinctive regions.
//!
//! Coverage nodes are linked by overlap edges; each frontier node hangs off
//! the coverage node with the cheapest cylinder-constrained path to it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{build_hull, polys_intersect, ConvexPolyhedron, GeometryError, Vec3};
use crate::knowledge::{Cell, KnowledgeGrid};
use crate::planning::{cylinder_astar, goal_radius, polyline_clear, CylinderConstraint, PlannerParams};
use crate::regions::{build_coverage_region_with, DistinctiveRegion};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Coverage,
    Frontier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Coverage region id or DER id.
    pub region_ref: u64,
    pub centroid: Vec3,
    pub volume: f64,
    /// Traversable point standing in for the node in path queries.
    pub anchor: Vec3,
    pub hull: ConvexPolyhedron,
    /// DER hull version mirrored by a frontier node.
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    CcOverlap,
    CfPath,
}

/// Undirected edge with `a < b`; `path` runs from `a`'s anchor to `b`'s.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub kind: EdgeKind,
    pub path: Option<Vec<Vec3>>,
    pub cost: f64,
}

impl TopoEdge {
    /// Edges without a planned path are kept for topology but not traveled.
    pub fn is_traversable(&self) -> bool {
        self.path.is_some()
    }
}

/// Settings shared by map updates.
#[derive(Debug, Clone, Copy)]
pub struct MapParams<'a> {
    pub zeta_coverage: f64,
    pub coverage_dirs: &'a [Vec3],
    pub r_near: f64,
    pub planner: &'a PlannerParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageUpdate {
    /// The node now standing for the robot's coverage region.
    pub node: NodeId,
    pub merged: bool,
    /// The hull just built at the pose, before any merge.
    pub region: ConvexPolyhedron,
    /// DERs whose frontier nodes were deleted because the new hull covers
    /// their centroid.
    pub deleted_ders: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCheck {
    Clear,
    Repaired,
    /// Replanning failed; the edge is now unusable.
    Dropped,
    Missing,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncReport {
    /// Active DERs whose centroid already lies in coverage.
    pub covered: Vec<u64>,
    /// Active DERs with no finite path from any candidate coverage node.
    pub unreachable: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct TopoGraph {
    nodes: BTreeMap<NodeId, TopoNode>,
    edges: BTreeMap<(NodeId, NodeId), TopoEdge>,
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
    der_nodes: BTreeMap<u64, NodeId>,
    next_id: NodeId,
    next_region: u64,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

/// Free of known obstacles and their inflation, inside the world interior.
pub fn is_traversable_point(grid: &KnowledgeGrid, p: Vec3) -> bool {
    let l = grid.lattice();
    let v = l.voxel_of(p);
    l.in_bounds(v) && !l.is_boundary(v) && grid.get(v) != Cell::Occupied && !grid.is_inflated(v)
}

/// Anchor of a DER: its centroid when traversable, otherwise the nearest
/// traversable member, otherwise the nearest member not in an obstacle.
pub fn der_anchor(grid: &KnowledgeGrid, der: &DistinctiveRegion) -> Vec3 {
    let c = der.centroid();
    if is_traversable_point(grid, c) {
        return c;
    }
    let nearest = |ok: &dyn Fn(Vec3) -> bool| {
        der.members.iter().filter(|m| ok(**m)).min_by(|a, b| a.distance(c).total_cmp(&b.distance(c))).copied()
    };
    nearest(&|m| is_traversable_point(grid, m))
        .or_else(|| nearest(&|m| grid.at_point(m) != Cell::Occupied))
        .unwrap_or(c)
}

impl TopoGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: NodeId) -> Option<&TopoNode> {
        self.nodes.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &TopoEdge> {
        self.edges.values()
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&TopoEdge> {
        self.edges.get(&key(a, b))
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.get(&id).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn coverage_nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Coverage)
    }

    pub fn frontier_nodes(&self) -> impl Iterator<Item = &TopoNode> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Frontier)
    }

    pub fn coverage_hulls(&self) -> Vec<&ConvexPolyhedron> {
        self.coverage_nodes().map(|n| &n.hull).collect()
    }

    pub fn frontier_node_of(&self, der: u64) -> Option<NodeId> {
        self.der_nodes.get(&der).copied()
    }

    /// Waypoints of edge `from → to`, oriented accordingly.
    pub fn oriented_path(&self, from: NodeId, to: NodeId) -> Option<Vec<Vec3>> {
        let e = self.edge(from, to)?;
        let mut p = e.path.clone()?;
        if e.a != from {
            p.reverse();
        }
        Some(p)
    }

    /// Lowest-id coverage node whose hull contains `p`.
    pub fn containing_coverage(&self, p: Vec3, tol: f64) -> Option<NodeId> {
        self.coverage_nodes().find(|n| n.hull.contains(p, tol)).map(|n| n.id)
    }

    /// Adds a node directly. Intended for map construction and tests.
    pub fn insert_node(&mut self, kind: NodeKind, region_ref: u64, hull: ConvexPolyhedron, anchor: Vec3) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        let (centroid, volume) = hull.centroid_and_volume();
        self.nodes.insert(id, TopoNode { id, kind, region_ref, centroid, volume, anchor, hull, version: 0 });
        self.adj.entry(id).or_default();
        if kind == NodeKind::Frontier {
            self.der_nodes.insert(region_ref, id);
        }
        id
    }

    /// Adds or replaces the edge between `a` and `b`; `path` runs from `a` to `b`.
    pub fn insert_edge(&mut self, a: NodeId, b: NodeId, kind: EdgeKind, path: Option<Vec<Vec3>>, cost: f64) {
        assert!(a != b && self.nodes.contains_key(&a) && self.nodes.contains_key(&b), "edge endpoints must exist");
        let (lo, hi) = key(a, b);
        let path = path.map(|mut p| {
            if lo != a {
                p.reverse();
            }
            p
        });
        self.edges.insert((lo, hi), TopoEdge { a: lo, b: hi, kind, path, cost });
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    /// Re-checks the stored path of edge `a`-`b` against the current belief.
    /// A blocked path is replanned between the anchors; a coverage-coverage
    /// edge without a new path becomes non-traversable, a frontier node
    /// without one is dropped until the next attachment pass.
    pub fn revalidate_edge(
        &mut self,
        grid: &KnowledgeGrid,
        a: NodeId,
        b: NodeId,
        planner: &PlannerParams,
    ) -> EdgeCheck {
        let Some(e) = self.edge(a, b) else { return EdgeCheck::Missing };
        let Some(path) = &e.path else { return EdgeCheck::Clear };
        if polyline_clear(grid, path) {
            return EdgeCheck::Clear;
        }
        let (lo, hi, kind) = (e.a, e.b, e.kind);
        let (from, to) = (self.nodes[&lo].anchor, self.nodes[&hi].anchor);
        let cyl = CylinderConstraint::between(from, to, planner);
        match cylinder_astar(grid, from, to, Some(&cyl), &planner.astar_options()) {
            Ok(r) => {
                self.insert_edge(lo, hi, kind, Some(r.waypoints), r.cost);
                EdgeCheck::Repaired
            }
            Err(_) if kind == EdgeKind::CcOverlap => {
                let cost = self.nodes[&lo].centroid.distance(self.nodes[&hi].centroid);
                self.insert_edge(lo, hi, kind, None, cost);
                EdgeCheck::Dropped
            }
            Err(_) => {
                let f = if self.nodes[&lo].kind == NodeKind::Frontier { lo } else { hi };
                self.remove_node(f);
                EdgeCheck::Dropped
            }
        }
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) {
        if self.edges.remove(&key(a, b)).is_some() {
            self.adj.entry(a).or_default().remove(&b);
            self.adj.entry(b).or_default().remove(&a);
        }
    }

    pub fn remove_node(&mut self, id: NodeId) -> Option<TopoNode> {
        let node = self.nodes.remove(&id)?;
        for n in self.adj.remove(&id).unwrap_or_default() {
            self.edges.remove(&key(id, n));
            if let Some(s) = self.adj.get_mut(&n) {
                s.remove(&id);
            }
        }
        if node.kind == NodeKind::Frontier {
            self.der_nodes.remove(&node.region_ref);
        }
        Some(node)
    }

    /// Builds the coverage region at `pose`, deletes frontier nodes it covers,
    /// then either merges it into a coverage node when each hull holds the
    /// other's centroid, or adds it with overlap edges to every surrounding node
    /// it intersects.
    pub fn add_coverage(
        &mut self,
        grid: &KnowledgeGrid,
        pose: Vec3,
        p: &MapParams,
    ) -> Result<CoverageUpdate, GeometryError> {
        let region = build_coverage_region_with(grid, pose, p.zeta_coverage, p.coverage_dirs, self.next_region)?;
        self.next_region += 1;
        let hull = region.hull;
        let fresh = hull.clone();

        let covered: Vec<NodeId> =
            self.frontier_nodes().filter(|n| hull.contains(n.centroid, 0.0)).map(|n| n.id).collect();
        let mut deleted_ders = Vec::new();
        for id in covered {
            if let Some(n) = self.remove_node(id) {
                deleted_ders.push(n.region_ref);
            }
        }

        let c = hull.centroid();
        let reach = 2.0 * p.zeta_coverage;
        let host = self
            .coverage_nodes()
            .filter(|n| n.centroid.distance(c) <= reach)
            .find(|n| n.hull.contains(c, 0.0) && hull.contains(n.centroid, 0.0))
            .map(|n| n.id);

        let node = match host {
            Some(b) => {
                let old = &self.nodes[&b];
                let pts: Vec<Vec3> = old.hull.vertices().iter().chain(hull.vertices()).copied().collect();
                let merged = build_hull(&pts)?;
                let old_anchor = old.anchor;
                let (centroid, volume) = merged.centroid_and_volume();
                let anchor = if is_traversable_point(grid, centroid) { centroid } else { old_anchor };
                let n = self.nodes.get_mut(&b).unwrap();
                n.hull = merged;
                n.centroid = centroid;
                n.volume = volume;
                n.anchor = anchor;
                n.version += 1;
                let stale: Vec<NodeId> =
                    self.neighbors(b).filter(|m| self.nodes[m].kind == NodeKind::Coverage).collect();
                for m in stale {
                    self.remove_edge(b, m);
                }
                self.link_overlaps(grid, b, p);
                b
            }
            None => {
                let anchor = if is_traversable_point(grid, c) { c } else { pose };
                let id = self.insert_node(NodeKind::Coverage, region.id, hull, anchor);
                self.link_overlaps(grid, id, p);
                id
            }
        };
        Ok(CoverageUpdate { node, merged: host.is_some(), region: fresh, deleted_ders })
    }

    fn link_overlaps(&mut self, grid: &KnowledgeGrid, id: NodeId, p: &MapParams) {
        let me = self.nodes[&id].clone();
        let reach = 2.0 * p.zeta_coverage;
        let others: Vec<TopoNode> = self
            .coverage_nodes()
            .filter(|n| n.id != id && n.centroid.distance(me.centroid) <= reach && polys_intersect(&n.hull, &me.hull))
            .cloned()
            .collect();
        for o in others {
            let cyl = CylinderConstraint::between(me.anchor, o.anchor, p.planner);
            match cylinder_astar(grid, me.anchor, o.anchor, Some(&cyl), &p.planner.astar_options()) {
                Ok(r) => self.insert_edge(id, o.id, EdgeKind::CcOverlap, Some(r.waypoints), r.cost),
                Err(_) => self.insert_edge(id, o.id, EdgeKind::CcOverlap, None, me.centroid.distance(o.centroid)),
            }
        }
    }

    /// Cheapest cylinder path from a coverage node to `anchor`. Candidates
    /// are tried nearest first and pruned by the straight-line lower bound.
    fn best_attachment(
        &self,
        grid: &KnowledgeGrid,
        anchor: Vec3,
        p: &MapParams,
        only: Option<NodeId>,
    ) -> Option<(NodeId, Vec<Vec3>, f64)> {
        let goal_r = goal_radius(grid, p.planner.goal_tol);
        let mut cands: Vec<(f64, NodeId, Vec3)> = self
            .coverage_nodes()
            .filter(|n| only.is_none_or(|o| o == n.id))
            .map(|n| (n.anchor.distance(anchor), n.id, n.anchor))
            .filter(|(d, _, _)| *d <= p.r_near)
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(NodeId, Vec<Vec3>, f64)> = None;
        for (d, id, from) in cands.into_iter().take(p.planner.attach_candidates.max(1)) {
            if best.as_ref().is_some_and(|b| d - goal_r >= b.2) {
                break;
            }
            let cyl = CylinderConstraint::between(from, anchor, p.planner);
            if let Ok(r) = cylinder_astar(grid, from, anchor, Some(&cyl), &p.planner.astar_options()) {
                if best.as_ref().is_none_or(|b| r.cost < b.2) {
                    best = Some((id, r.waypoints, r.cost));
                }
            }
        }
        best
    }

    fn attach(&mut self, id: NodeId, grid: &KnowledgeGrid, p: &MapParams) -> bool {
        let anchor = self.nodes[&id].anchor;
        let old: Vec<NodeId> = self.neighbors(id).collect();
        for o in old {
            self.remove_edge(id, o);
        }
        match self.best_attachment(grid, anchor, p, None) {
            Some((c, path, cost)) => {
                self.insert_edge(c, id, EdgeKind::CfPath, Some(path), cost);
                true
            }
            None => false,
        }
    }

    /// The coverage node a frontier node hangs off, with the edge cost.
    pub fn attachment(&self, frontier: NodeId) -> Option<(NodeId, f64)> {
        let n = self.neighbors(frontier).next()?;
        Some((n, self.edge(frontier, n)?.cost))
    }

    /// Brings frontier nodes in line with the active DER set.
    ///
    /// Nodes of vanished or consumed DERs are dropped; nodes whose DER hull
    /// changed, or whose coverage node is in `changed_coverage`, are
    /// re-attached; `new_coverage` is offered to every frontier node within
    /// `r_near` as a cheaper attachment; DERs without a node get one unless
    /// their centroid is already covered or no finite path exists.
    pub fn sync_frontier(
        &mut self,
        grid: &KnowledgeGrid,
        ders: &[DistinctiveRegion],
        changed_coverage: &[NodeId],
        new_coverage: Option<NodeId>,
        p: &MapParams,
    ) -> SyncReport {
        let mut report = SyncReport::default();
        let active: BTreeMap<u64, &DistinctiveRegion> =
            ders.iter().filter(|d| d.is_active()).map(|d| (d.id, d)).collect();

        let stale: Vec<NodeId> =
            self.frontier_nodes().filter(|n| !active.contains_key(&n.region_ref)).map(|n| n.id).collect();
        for id in stale {
            self.remove_node(id);
        }

        for (der_id, der) in &active {
            let centroid = der.centroid();
            if self.coverage_nodes().any(|c| c.hull.contains(centroid, 0.0)) {
                if let Some(id) = self.frontier_node_of(*der_id) {
                    self.remove_node(id);
                }
                report.covered.push(*der_id);
                continue;
            }
            let existing = self.frontier_node_of(*der_id);
            let needs_attach = match existing {
                None => true,
                Some(id) => {
                    let n = &self.nodes[&id];
                    n.version != der.version || self.attachment(id).is_none_or(|(c, _)| changed_coverage.contains(&c))
                }
            };
            let id = match existing {
                Some(id) if !needs_attach => {
                    if let Some(nc) = new_coverage {
                        self.offer_attachment(grid, id, nc, p);
                    }
                    continue;
                }
                Some(id) => {
                    let n = self.nodes.get_mut(&id).unwrap();
                    let (c, v) = der.hull.centroid_and_volume();
                    n.hull = der.hull.clone();
                    n.centroid = c;
                    n.volume = v;
                    n.version = der.version;
                    n.anchor = der_anchor(grid, der);
                    id
                }
                None => {
                    let id = self.insert_node(NodeKind::Frontier, *der_id, der.hull.clone(), der_anchor(grid, der));
                    self.nodes.get_mut(&id).unwrap().version = der.version;
                    id
                }
            };
            if !self.attach(id, grid, p) {
                self.remove_node(id);
                report.unreachable.push(*der_id);
            }
        }
        report
    }

    fn offer_attachment(&mut self, grid: &KnowledgeGrid, id: NodeId, cov: NodeId, p: &MapParams) {
        let Some((cur, cost)) = self.attachment(id) else { return };
        if cur == cov {
            return;
        }
        let anchor = self.nodes[&id].anchor;
        let goal_r = goal_radius(grid, p.planner.goal_tol);
        if self.nodes[&cov].anchor.distance(anchor) - goal_r >= cost {
            return;
        }
        if let Some((c, path, new_cost)) = self.best_attachment(grid, anchor, p, Some(cov)) {
            if new_cost < cost {
                self.remove_edge(id, cur);
                self.insert_edge(c, id, EdgeKind::CfPath, Some(path), new_cost);
            }
        }
    }

    /// Node and edge tables as CSV.
    pub fn to_csv(&self) -> (String, String) {
        let mut nodes = String::from("id,kind,region,cx,cy,cz,volume\n");
        for n in self.nodes.values() {
            let kind = match n.kind {
                NodeKind::Coverage => "coverage",
                NodeKind::Frontier => "frontier",
            };
            let _ = writeln!(
                nodes,
                "{},{kind},{},{:.6},{:.6},{:.6},{:.6}",
                n.id, n.region_ref, n.centroid.x, n.centroid.y, n.centroid.z, n.volume
            );
        }
        let mut edges = String::from("a,b,kind,cost,traversable\n");
        for e in self.edges.values() {
            let kind = match e.kind {
                EdgeKind::CcOverlap => "cc_overlap",
                EdgeKind::CfPath => "cf_path",
            };
            let _ = writeln!(edges, "{},{},{kind},{:.6},{}", e.a, e.b, e.cost, e.is_traversable());
        }
        (nodes, edges)
    }
}
