//! Ground-truth world: raycasting against fine-step marching, generators and
//! the reachable-free oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topex::geometry::Vec3;
use topex::world::{generate_world, read_world, write_world, GroundTruthWorld, Lattice, RayHit, WorldKind, WorldSpec};

fn random_world(seed: u64, n: usize, density: f64) -> GroundTruthWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = Lattice::new(0.25, Vec3::ZERO, [n, n, n]);
    let occ: Vec<bool> = (0..l.len()).map(|_| rng.random::<f64>() < density).collect();
    GroundTruthWorld::from_occupancy(l, occ, l.extent() / 2.0)
}

fn random_dir(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// First range at which a fixed-step walk lands in an occupied voxel.
fn march(w: &GroundTruthWorld, o: Vec3, d: Vec3, max_range: f64, step: f64) -> Option<f64> {
    let mut t = 0.0;
    while t <= max_range {
        if w.is_occupied(w.lattice().voxel_of(o + d * t)) {
            return Some(t);
        }
        t += step;
    }
    None
}

/// Parameter interval over which the ray crosses a voxel box, by slabs.
fn pierce(l: &Lattice, v: [i64; 3], o: Vec3, d: Vec3) -> Option<(f64, f64)> {
    let lo = l.origin + Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * l.resolution;
    let (lo, o, d) = (lo.to_array(), o.to_array(), d.to_array());
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let hi = lo[a] + l.resolution;
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((lo[a] - o[a]) / d[a], (hi - o[a]) / d[a]);
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1 + 1e-12).then_some((t0, t1))
}

#[test]
fn raycast_matches_fine_marching() {
    let w = random_world(3, 32, 0.04);
    let l = *w.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let step = 0.01;
    let diag = l.resolution * 3f64.sqrt();
    let mut rays = 0;
    while rays < 10_000 {
        let o = Vec3::new(rng.random_range(0.3..7.7), rng.random_range(0.3..7.7), rng.random_range(0.3..7.7));
        if !w.is_free_point(o) {
            continue;
        }
        rays += 1;
        let d = random_dir(&mut rng);
        let max_range = rng.random_range(0.5..6.0);
        let hit = w.raycast(o, d, max_range).unwrap();
        match (hit, march(&w, o, d, max_range, step)) {
            (RayHit::Hit { range, point, voxel }, Some(m)) => {
                assert!(range <= max_range);
                assert!(point.distance(o + d * range) < 1e-9);
                assert!(w.is_occupied(voxel));
                assert!(range <= m + 1e-9, "dda {range} after march {m}");
                if m - range > diag {
                    // a corner clip the marcher stepped over: the sliver must be real and short
                    let (t0, t1) = pierce(&l, voxel, o, d).expect("dda voxel is not on the ray");
                    assert!((t0 - range).abs() < 1e-9 && t1 - t0 < step, "sliver {t0}..{t1}");
                }
            }
            (RayHit::Hit { range, voxel, .. }, None) => {
                // entered within the marcher's last step, or clipped between two of its samples
                let (t0, t1) = pierce(&l, voxel, o, d).expect("dda voxel is not on the ray");
                assert!((t0 - range).abs() < 1e-9, "entry {t0} vs range {range}");
                assert!(max_range - range < step || t1 - t0 < step, "sliver {t0}..{t1} within {max_range}");
            }
            (RayHit::Miss, Some(m)) => panic!("dda missed, march hit at {m}"),
            (RayHit::Miss, None) => {}
        }
    }
}

#[test]
fn axis_ray_to_a_wall() {
    let l = Lattice::new(0.25, Vec3::ZERO, [40, 20, 20]);
    let mut occ = vec![false; l.len()];
    for y in 0..20 {
        for z in 0..20 {
            occ[l.index([20, y, z])] = true;
        }
    }
    let w = GroundTruthWorld::from_occupancy(l, occ, Vec3::new(2.0, 2.5, 2.5));
    let r = w.raycast(Vec3::new(2.0, 2.5, 2.5), Vec3::X, 10.0).unwrap().range().unwrap();
    assert!((r - 3.0).abs() <= 0.125, "range {r}");
}

fn reachable_oracle(w: &GroundTruthWorld) -> Vec<bool> {
    // union-find over 6-neighbor free pairs, then the spawn's component
    let l = *w.lattice();
    let mut parent: Vec<usize> = (0..l.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let occ = w.occupancy();
    for i in 0..l.len() {
        if occ[i] {
            continue;
        }
        let v = l.voxel_at(i);
        for a in 0..3 {
            let mut n = v;
            n[a] += 1;
            if let Some(j) = l.checked_index(n) {
                if !occ[j] {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
    }
    let s = l.index(l.voxel_of(w.spawn()));
    let root = find(&mut parent, s);
    (0..l.len()).map(|i| !occ[i] && find(&mut parent, i) == root).collect()
}

#[test]
fn reachable_free_matches_union_find() {
    for seed in 0..5 {
        let w = random_world(seed, 20, 0.3);
        if w.is_occupied(w.lattice().voxel_of(w.spawn())) {
            continue;
        }
        assert_eq!(w.reachable_free(), reachable_oracle(&w), "seed {seed}");
    }
}

fn spec(kind: WorldKind, seed: u64) -> WorldSpec {
    WorldSpec { kind, seed, ..WorldSpec::default() }
}

#[test]
fn generators_are_deterministic_and_sound() {
    for kind in [WorldKind::CorridorRooms, WorldKind::BranchingCave] {
        for seed in [1, 2] {
            let a = generate_world(&spec(kind, seed)).unwrap();
            let b = generate_world(&spec(kind, seed)).unwrap();
            assert_eq!(a, b, "{kind} seed {seed}");
            assert_eq!(write_world(&a), write_world(&b));
            let l = *a.lattice();
            assert!((0..l.len()).filter(|i| l.is_boundary(l.voxel_at(*i))).all(|i| a.occupancy()[i]));
            let s = a.spawn();
            for off in l.ball_offsets(1.0) {
                let v = l.voxel_of(s);
                assert!(!a.is_occupied([v[0] + off[0], v[1] + off[1], v[2] + off[2]]), "{kind} spawn clearance");
            }
            let reach = a.reachable_free().iter().filter(|r| **r).count();
            assert!(reach as f64 > 0.2 * a.count_free() as f64, "{kind} seed {seed}: {reach} reachable");
        }
    }
    let a = generate_world(&spec(WorldKind::CorridorRooms, 1)).unwrap();
    let b = generate_world(&spec(WorldKind::CorridorRooms, 2)).unwrap();
    assert_ne!(a.occupancy(), b.occupancy());
}

#[test]
fn world_text_round_trip() {
    let w = generate_world(&spec(WorldKind::BranchingCave, 4)).unwrap();
    let text = write_world(&w);
    let back = read_world(&text).unwrap();
    assert_eq!(back, w);
    assert_eq!(write_world(&back), text);
}
