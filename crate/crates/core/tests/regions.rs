//! Frontier clustering and distinctive-region maintenance.

mod common;

use common::{
    blob, cuboid, der_params, ders_at_fixpoint, four_cluster_scene, random_scene, visible_pairs, walled_grid, DS,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topex::geometry::{ConvexPolyhedron, Vec3};
use topex::knowledge::{simulate_scan, Cell, FrontierPoints, KnowledgeGrid, SensorConfig};
use topex::regions::{
    build_coverage_region, cluster_frontier, has_mutual_visibility, merge_regions, update_ders, DerParams,
};
use topex::world::{generate_world, WorldKind, WorldSpec};

fn union_find_clusters(points: &[Vec3], d: f64, min_size: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if points[i].distance(points[j]) <= d {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups.retain(|g| g.len() >= min_size);
    groups
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clustering_matches_union_find(
        pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64, 0.0..3.0f64), 0..150),
        d in 0.2..2.0f64,
        min_size in 1usize..6,
    ) {
        let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
        prop_assert_eq!(cluster_frontier(&pts, d, min_size), union_find_clusters(&pts, d, min_size));
    }
}

#[test]
fn four_clusters_wall_and_coverage_give_three_regions() {
    assert_eq!(four_cluster_scene(true, true), 3);
    // each separator does its share of the work
    assert_eq!(four_cluster_scene(false, true), 2);
    assert_eq!(four_cluster_scene(true, false), 2);
    assert_eq!(four_cluster_scene(false, false), 1);
}

#[test]
fn mutual_visibility_cases() {
    let open = walled_grid([12.0, 12.0, 4.0], None);
    let a = cuboid(Vec3::new(2.0, 2.0, 1.0), Vec3::new(3.0, 3.0, 2.0));
    let b = cuboid(Vec3::new(2.0, 5.0, 1.0), Vec3::new(3.0, 6.0, 2.0));
    assert!(has_mutual_visibility(&a, &b, &open, &[], 1.0));
    let l = *open.lattice();
    let mut walled = KnowledgeGrid::new(l, 0.0);
    for i in 0..l.len() {
        let v = l.voxel_at(i);
        walled.set(v, if v[1] == 16 { Cell::Occupied } else { Cell::Free });
    }
    assert!(!has_mutual_visibility(&a, &b, &walled, &[], 1.0));
    let between = cuboid(Vec3::new(0.5, 3.8, 0.0), Vec3::new(5.0, 4.2, 4.0));
    assert!(!has_mutual_visibility(&a, &b, &open, &[&between], 1.0));
    assert!(has_mutual_visibility(&a, &b, &open, &[&between], 0.0));
}

#[test]
fn fixpoint_regions_are_pairwise_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let p = der_params();
    for scene in 0..50 {
        let (grid, fr, hulls) = random_scene(&mut rng);
        let cov: Vec<&ConvexPolyhedron> = hulls.iter().collect();
        let (ders, _) =
            ders_at_fixpoint(&fr, &grid, &cov, &p).unwrap_or_else(|| panic!("scene {scene} did not converge"));
        for d in ders.iter().filter(|d| d.is_active()) {
            assert!(d.members.len() >= p.min_cluster_size, "scene {scene}");
            assert!(d.members.iter().all(|m| d.hull.contains(*m, 1e-6)), "scene {scene}");
            assert!(!cov.iter().any(|h| h.contains(d.centroid(), 0.0)), "scene {scene}");
        }
        let pairs = visible_pairs(&ders, &grid, &cov, &p);
        assert!(pairs.is_empty(), "scene {scene}: regions {pairs:?} see each other");
    }
}

#[test]
fn merge_contains_both_constituents() {
    let mut fr = FrontierPoints { ds: DS, ..FrontierPoints::default() };
    blob(&mut fr, [2, 2, 2], [3, 3, 3]);
    blob(&mut fr, [9, 2, 2], [3, 3, 3]);
    let grid = walled_grid([8.0, 8.0, 4.0], None);
    let mut next = 0;
    let p = DerParams { r_near: 0.1, ..der_params() };
    let ders = update_ders(&fr, &[], &grid, &[], &p, 0.0, &mut next);
    assert_eq!(ders.len(), 2);
    let m = merge_regions(&ders[0], &ders[1]).unwrap();
    assert_eq!(m.id, ders[0].id);
    assert_eq!(m.members.len(), 54);
    for d in &ders {
        assert!(d.hull.vertices().iter().all(|v| m.hull.contains(*v, 1e-7)));
        assert!(m.hull.volume() >= d.hull.volume());
    }
}

#[test]
fn coverage_region_stays_within_range() {
    let spec = WorldSpec { kind: WorldKind::CorridorRooms, seed: 5, ..WorldSpec::default() };
    let w = generate_world(&spec).unwrap();
    let mut g = KnowledgeGrid::new(*w.lattice(), 0.4);
    g.integrate_scan(&simulate_scan(&w, w.spawn(), &SensorConfig::default()).unwrap());
    let r = build_coverage_region(&g, w.spawn(), 10.0, 384, 0).unwrap();
    assert!(r.hull.contains(w.spawn(), 0.0));
    for v in r.hull.vertices() {
        assert!(v.distance(w.spawn()) <= 10.0 + 0.125);
    }
    let again = build_coverage_region(&g, w.spawn(), 10.0, 384, 0).unwrap();
    assert_eq!(r, again);
}
