//! Oracles and scene builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topex::geometry::{build_hull, ConvexPolyhedron, Vec3};
use topex::knowledge::{extract_frontier_points, simulate_scan, Cell, FrontierPoints, KnowledgeGrid, SensorConfig};
use topex::regions::{build_coverage_region, has_mutual_visibility, update_ders, DerParams, DistinctiveRegion};
use topex::topomap::{EdgeKind, NodeId, NodeKind, TopoGraph};
use topex::world::{GroundTruthWorld, Lattice, Voxel, NEIGHBORS_26};

// ---------------------------------------------------------------- geometry

/// Axis-aligned box hull.
pub fn cuboid(lo: Vec3, hi: Vec3) -> ConvexPolyhedron {
    let corners: Vec<Vec3> = (0..8)
        .map(|k| {
            Vec3::new(
                if k & 1 == 0 { lo.x } else { hi.x },
                if k & 2 == 0 { lo.y } else { hi.y },
                if k & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    build_hull(&corners).unwrap()
}

/// Stratified Monte-Carlo volume with at least `samples` uniform samples.
///
/// The sampling box is aligned to the principal axes of the vertices, so
/// thin hulls still fill a fair share of it, and split into equal cells that
/// each get the same number of samples. Membership uses face planes rebuilt
/// from the face triangles, not the hull's own planes. A cell whose eight
/// corners satisfy every plane is inside as a whole, one whose corners all
/// violate some plane is outside, and in either case its samples are counted
/// without drawing them. The other cells test only the planes that cut them.
pub fn monte_carlo_volume(h: &ConvexPolyhedron, samples: usize, seed: u64) -> f64 {
    const K: usize = 16;
    let vs: Vec<Vector3<f64>> = h.vertices().iter().map(|v| Vector3::new(v.x, v.y, v.z)).collect();
    let mean = vs.iter().sum::<Vector3<f64>>() / vs.len() as f64;
    let cov = vs.iter().fold(Matrix3::zeros(), |acc, v| acc + (v - mean) * (v - mean).transpose());
    let axes = SymmetricEigen::new(cov).eigenvectors;
    let local: Vec<Vector3<f64>> = vs.iter().map(|v| axes.transpose() * (v - mean)).collect();
    let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
    for u in &local {
        lo = lo.inf(u);
        hi = hi.sup(u);
    }
    // n·u <= d, oriented so the vertex mean (the local origin) is inside
    let planes: Vec<(Vector3<f64>, f64)> = h
        .faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|k| local[k as usize]);
            let n = (b - a).cross(&(c - a));
            let d = n.dot(&a);
            if d < 0.0 {
                (-n, -d)
            } else {
                (n, d)
            }
        })
        .collect();
    let step = (hi - lo) / K as f64;
    let per_cell = samples.div_ceil(K * K * K);
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut inside = 0usize;
    'cells: for c in 0..K * K * K {
        let base = lo + Vector3::new((c % K) as f64, (c / K % K) as f64, (c / (K * K)) as f64).component_mul(&step);
        let corners: Vec<Vector3<f64>> = (0..8)
            .map(|k| base + Vector3::new((k & 1) as f64, (k >> 1 & 1) as f64, (k >> 2) as f64).component_mul(&step))
            .collect();
        let mut live = Vec::new();
        for (n, d) in &planes {
            match corners.iter().filter(|u| n.dot(u) <= *d).count() {
                0 => continue 'cells,
                8 => {}
                _ => live.push((n, *d)),
            }
        }
        if live.is_empty() {
            inside += per_cell;
            continue;
        }
        for _ in 0..per_cell {
            let u = base + Vector3::new(rng.random(), rng.random(), rng.random()).component_mul(&step);
            inside += usize::from(live.iter().all(|(n, d)| n.dot(&u) <= *d));
        }
    }
    step.x * step.y * step.z * (K * K * K) as f64 * inside as f64 / (per_cell * K * K * K) as f64
}

// --------------------------------------------------------------- knowledge

/// Belief with roughly 45% free, 15% occupied, the rest unknown.
pub fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> KnowledgeGrid {
    let l = Lattice::new(0.25, Vec3::ZERO, [n, n, n]);
    let mut g = KnowledgeGrid::new(l, 0.0);
    for i in 0..l.len() {
        let r: f64 = rng.random();
        let c = if r < 0.45 {
            Cell::Free
        } else if r < 0.6 {
            Cell::Occupied
        } else {
            Cell::Unknown
        };
        g.set(l.voxel_at(i), c);
    }
    g
}

/// Up to three hulls of random point blobs inside `[0, extent]³`.
pub fn random_hulls(rng: &mut ChaCha8Rng, extent: f64) -> Vec<ConvexPolyhedron> {
    (0..rng.random_range(0..4))
        .filter_map(|_| {
            let c = Vec3::splat(extent) * rng.random::<f64>();
            let pts: Vec<Vec3> = (0..12)
                .map(|_| {
                    c + Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
                })
                .collect();
            build_hull(&pts).ok()
        })
        .collect()
}

/// Downsampling cells holding a detected-free voxel outside every hull.
pub fn frontier_cells_oracle(g: &KnowledgeGrid, hulls: &[ConvexPolyhedron], ds: f64) -> BTreeSet<Voxel> {
    let l = g.lattice();
    let tol = l.resolution / 2.0;
    (0..l.len())
        .filter(|i| g.cells()[*i] == Cell::Free)
        .map(|i| l.center_of_index(i))
        .filter(|p| !hulls.iter().any(|h| h.contains(*p, tol)))
        .map(|p| {
            let r = (p - l.origin) / ds;
            [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
        })
        .collect()
}

pub fn open_box(n: usize) -> GroundTruthWorld {
    let l = Lattice::new(0.25, Vec3::ZERO, [n, n, n]);
    GroundTruthWorld::from_occupancy(l, vec![false; l.len()], l.extent() / 2.0 + Vec3::splat(0.01))
}

/// Minimum distance from an interior `pose` to the hull boundary.
pub fn inradius(h: &ConvexPolyhedron, pose: Vec3) -> f64 {
    h.planes().iter().map(|pl| -pl.signed_distance(pose)).fold(f64::INFINITY, f64::min)
}

/// One near-spherical scan in a 25 m empty box, one coverage hull at the
/// pose. Returns the frontier ranges from the pose and the hull's inradius.
pub fn annulus_ranges(zeta_detect: f64, zeta_coverage: f64) -> (Vec<f64>, f64) {
    let w = open_box(100);
    let pose = w.spawn();
    let sensor = SensorConfig { zeta_detect, zeta_coverage, fov_v: 179.0, n_rays: 120_000, ..SensorConfig::default() };
    let mut g = KnowledgeGrid::new(*w.lattice(), 0.0);
    g.integrate_scan(&simulate_scan(&w, pose, &sensor).unwrap());
    let region = build_coverage_region(&g, pose, zeta_coverage, 4000, 0).unwrap();
    let fr = extract_frontier_points(&g, std::slice::from_ref(&region.hull), 0.25);
    let inner = inradius(&region.hull, pose);
    (fr.points.iter().map(|p| p.distance(pose)).collect(), inner)
}

// ----------------------------------------------------------------- regions

pub const DS: f64 = 0.5;

pub fn der_params() -> DerParams {
    DerParams { ds: DS, d_cluster: 2.0 * DS, min_cluster_size: 5, r_near: 30.0, visibility_fraction: 1.0 }
}

/// `n[0] × n[1] × n[2]` points spaced `DS` from cell `lo`, one per cell.
pub fn blob(fr: &mut FrontierPoints, lo: [i64; 3], n: [i64; 3]) {
    for x in 0..n[0] {
        for y in 0..n[1] {
            for z in 0..n[2] {
                let c = [lo[0] + x, lo[1] + y, lo[2] + z];
                fr.cells.push(c);
                fr.points.push(Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * DS);
            }
        }
    }
}

/// Fully detected belief, free except for an optional wall plane `x = wall_x`.
pub fn walled_grid(size: [f64; 3], wall_x: Option<i64>) -> KnowledgeGrid {
    let dims = [(size[0] / 0.25) as usize, (size[1] / 0.25) as usize, (size[2] / 0.25) as usize];
    let l = Lattice::new(0.25, Vec3::ZERO, dims);
    let mut g = KnowledgeGrid::new(l, 0.0);
    for i in 0..l.len() {
        let v = l.voxel_at(i);
        g.set(v, if Some(v[0]) == wall_x { Cell::Occupied } else { Cell::Free });
    }
    g
}

/// Four clusters: g1 and g2 side by side in open space, g3 behind a wall,
/// g4 behind a coverage hull. Returns the number of active regions.
pub fn four_cluster_scene(wall: bool, coverage: bool) -> usize {
    let grid = walled_grid([20.0, 20.0, 4.0], wall.then_some(40));
    let mut fr = FrontierPoints { ds: DS, ..FrontierPoints::default() };
    blob(&mut fr, [7, 7, 3], [3, 3, 3]); // g1 around (4, 4, 2)
    blob(&mut fr, [7, 13, 3], [3, 3, 3]); // g2 around (4, 7, 2)
    blob(&mut fr, [27, 10, 3], [3, 3, 3]); // g3 around (14, 5.5, 2), past the wall at x = 10
    blob(&mut fr, [8, 33, 3], [3, 3, 3]); // g4 around (4.5, 17, 2), past the hull at y = 11..13
    let hull = cuboid(Vec3::new(0.5, 11.0, 0.0), Vec3::new(9.5, 13.0, 4.0));
    let cov: Vec<&ConvexPolyhedron> = if coverage { vec![&hull] } else { vec![] };
    let mut next = 0;
    let ders = update_ders(&fr, &[], &grid, &cov, &der_params(), 0.0, &mut next);
    ders.iter().filter(|d| d.is_active()).count()
}

/// Walls with gaps, frontier blobs, and coverage pillars on a 16×16×4 m grid.
pub fn random_scene(rng: &mut ChaCha8Rng) -> (KnowledgeGrid, FrontierPoints, Vec<ConvexPolyhedron>) {
    let l = Lattice::new(0.25, Vec3::ZERO, [64, 64, 16]);
    let mut occ = vec![false; l.len()];
    for _ in 0..rng.random_range(0..4) {
        let along_x = rng.random::<bool>();
        let at = rng.random_range(8..56);
        let g0 = rng.random_range(0..56);
        let g1 = g0 + rng.random_range(0..10);
        for (i, o) in occ.iter_mut().enumerate() {
            let v = l.voxel_at(i);
            let (fixed, run) = if along_x { (v[1], v[0]) } else { (v[0], v[1]) };
            if fixed == at && !(g0..g1).contains(&run) {
                *o = true;
            }
        }
    }
    let mut grid = KnowledgeGrid::new(l, 0.0);
    for (i, o) in occ.iter().enumerate() {
        grid.set(l.voxel_at(i), if *o { Cell::Occupied } else { Cell::Free });
    }
    let mut fr = FrontierPoints { ds: DS, ..FrontierPoints::default() };
    let mut taken = BTreeSet::new();
    for _ in 0..rng.random_range(2..8) {
        let lo = [rng.random_range(0..28), rng.random_range(0..28), rng.random_range(0..5)];
        let n = [rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4)];
        let mut tmp = FrontierPoints { ds: DS, ..FrontierPoints::default() };
        blob(&mut tmp, lo, n);
        for (p, c) in tmp.points.into_iter().zip(tmp.cells) {
            if c[2] < 8 && !occ[l.index(l.voxel_of(p))] && taken.insert(c) {
                fr.points.push(p);
                fr.cells.push(c);
            }
        }
    }
    let hulls = (0..rng.random_range(0..3))
        .map(|_| {
            let lo = Vec3::new(rng.random_range(0.0..13.0), rng.random_range(0.0..13.0), 0.0);
            cuboid(lo, lo + Vec3::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), 4.0))
        })
        .collect();
    (grid, fr, hulls)
}

fn signature(ders: &[DistinctiveRegion]) -> Vec<(u64, usize, bool)> {
    ders.iter().map(|d| (d.id, d.members.len(), d.is_active())).collect()
}

/// Repeats the region update on fixed inputs until nothing changes.
/// Returns the regions and the number of passes, or `None` after 50.
pub fn ders_at_fixpoint(
    fr: &FrontierPoints,
    grid: &KnowledgeGrid,
    cov: &[&ConvexPolyhedron],
    p: &DerParams,
) -> Option<(Vec<DistinctiveRegion>, usize)> {
    let mut next = 0;
    let mut ders = update_ders(fr, &[], grid, cov, p, 0.0, &mut next);
    for pass in 1..=50 {
        let again = update_ders(fr, &ders, grid, cov, p, pass as f64, &mut next);
        let stable = signature(&again) == signature(&ders);
        ders = again;
        if stable {
            return Some((ders, pass));
        }
    }
    None
}

/// Active pairs within `r_near` that still see each other.
pub fn visible_pairs(
    ders: &[DistinctiveRegion],
    grid: &KnowledgeGrid,
    cov: &[&ConvexPolyhedron],
    p: &DerParams,
) -> Vec<(u64, u64)> {
    let active: Vec<&DistinctiveRegion> = ders.iter().filter(|d| d.is_active()).collect();
    let mut out = Vec::new();
    for (i, a) in active.iter().enumerate() {
        for b in &active[i + 1..] {
            if a.centroid().distance(b.centroid()) <= p.r_near
                && has_mutual_visibility(&a.hull, &b.hull, grid, cov, p.visibility_fraction)
            {
                out.push((a.id, b.id));
            }
        }
    }
    out
}

// ---------------------------------------------------------------- planning

/// Belief over an `n³` lattice: `density` occupied, free up to 70%, rest unknown.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize, density: f64) -> KnowledgeGrid {
    let l = Lattice::new(0.25, Vec3::ZERO, [n, n, n]);
    let mut g = KnowledgeGrid::new(l, 0.0);
    for i in 0..l.len() {
        let r: f64 = rng.random();
        if r < density {
            g.set(l.voxel_at(i), Cell::Occupied);
        } else if r < 0.7 {
            g.set(l.voxel_at(i), Cell::Free);
        }
    }
    g
}

pub fn interior_free_voxel(rng: &mut ChaCha8Rng, g: &KnowledgeGrid) -> Voxel {
    let n = g.lattice().dims[0] as i64;
    loop {
        let v = [rng.random_range(1..n - 1), rng.random_range(1..n - 1), rng.random_range(1..n - 1)];
        if g.get(v) != Cell::Occupied {
            return v;
        }
    }
}

/// Lattice Dijkstra under the planner's move rule: 26 neighbors, interior
/// voxels only, diagonal moves need an obstacle-free bounding box. Returns the
/// cost to the nearest voxel whose center is within `goal_r` of `goal`.
pub fn lattice_dijkstra(g: &KnowledgeGrid, start: Voxel, goal: Vec3, goal_r: f64) -> Option<f64> {
    let l = g.lattice();
    let blocked = |v: Voxel| !l.in_bounds(v) || l.is_boundary(v) || g.get(v) == Cell::Occupied;
    let box_clear = |a: Voxel, b: Voxel| {
        (a[0].min(b[0])..=a[0].max(b[0])).all(|x| {
            (a[1].min(b[1])..=a[1].max(b[1]))
                .all(|y| (a[2].min(b[2])..=a[2].max(b[2])).all(|z| g.get([x, y, z]) != Cell::Occupied))
        })
    };
    let mut dist = vec![f64::INFINITY; l.len()];
    let mut heap = BinaryHeap::new();
    let s = l.index(start);
    dist[s] = 0.0;
    // non-negative floats order like their bit patterns
    heap.push((Reverse(0u64), s));
    while let Some((Reverse(bits), i)) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[i] {
            continue;
        }
        let v = l.voxel_at(i);
        if l.center(v).distance(goal) <= goal_r {
            return Some(d);
        }
        for o in NEIGHBORS_26 {
            let n = [v[0] + o[0], v[1] + o[1], v[2] + o[2]];
            let k = o.iter().filter(|c| **c != 0).count();
            if blocked(n) || (k > 1 && !box_clear(v, n)) {
                continue;
            }
            let nd = d + l.resolution * (k as f64).sqrt();
            let ni = l.index(n);
            if nd < dist[ni] {
                dist[ni] = nd;
                heap.push((Reverse(nd.to_bits()), ni));
            }
        }
    }
    None
}

/// Textbook O(n²) Dijkstra over an undirected weighted edge list.
pub fn graph_dijkstra(n: usize, edges: &BTreeMap<(usize, usize), f64>, s: usize, t: usize) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|i| !done[*i]).min_by(|a, b| dist[*a].total_cmp(&dist[*b]))?;
        if dist[u].is_infinite() {
            return None;
        }
        if u == t {
            return Some(dist[u]);
        }
        done[u] = true;
        for (&(a, b), &c) in edges {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            dist[v] = dist[v].min(dist[u] + c);
        }
    }
    None
}

pub fn cube_hull(c: Vec3, r: f64) -> ConvexPolyhedron {
    cuboid(c - Vec3::splat(r), c + Vec3::splat(r))
}

pub type EdgeList = BTreeMap<(usize, usize), f64>;

/// Coverage nodes at random positions, each pair linked with probability
/// `p_edge` at a cost of one to three times the anchor distance.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p_edge: f64) -> (TopoGraph, Vec<NodeId>, EdgeList) {
    let mut g = TopoGraph::new();
    let mut ids = Vec::new();
    let mut pos = Vec::new();
    for _ in 0..n {
        let c = Vec3::new(rng.random_range(1.0..15.0), rng.random_range(1.0..15.0), rng.random_range(1.0..3.0));
        ids.push(g.insert_node(NodeKind::Coverage, 0, cube_hull(c, 0.3), c));
        pos.push(c);
    }
    let mut edges = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p_edge {
                let cost = pos[i].distance(pos[j]) * rng.random_range(1.0..3.0);
                g.insert_edge(ids[i], ids[j], EdgeKind::CcOverlap, Some(vec![pos[i], pos[j]]), cost);
                edges.insert((i, j), cost);
            }
        }
    }
    (g, ids, edges)
}
