//! Belief grid and frontier extraction against per-voxel set-difference oracles.

mod common;

use std::collections::BTreeSet;

use common::{annulus_ranges, frontier_cells_oracle, open_box, random_belief, random_hulls};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topex::geometry::{build_hull, Vec3};
use topex::knowledge::{extract_frontier_points, simulate_scan, Cell, KnowledgeGrid, SensorConfig};
use topex::world::Voxel;

#[test]
fn frontier_is_the_set_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let g = random_belief(&mut rng, 24);
        let hulls = random_hulls(&mut rng, 6.0);
        let ds = if case % 2 == 0 { 0.25 } else { 0.5 };
        let fr = extract_frontier_points(&g, &hulls, ds);
        for p in &fr.points {
            assert_eq!(g.at_point(*p), Cell::Free, "case {case}");
            assert!(hulls.iter().all(|h| !h.contains(*p, g.resolution() / 2.0)), "case {case}");
        }
        let got: BTreeSet<Voxel> = fr.cells.iter().copied().collect();
        assert_eq!(got.len(), fr.len(), "one point per cell");
        assert_eq!(got, frontier_cells_oracle(&g, &hulls, ds), "case {case}");
    }
}

#[test]
fn frontier_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_belief(&mut rng, 16);
    let all = extract_frontier_points(&g, &[], 0.25);
    assert_eq!(all.len(), g.free_count());
    let l = g.lattice();
    let e = l.extent();
    let cube: Vec<Vec3> =
        (0..8).map(|k| Vec3::new((k & 1) as f64 * e.x, ((k >> 1) & 1) as f64 * e.y, (k >> 2) as f64 * e.z)).collect();
    let everything = build_hull(&cube).unwrap();
    assert!(extract_frontier_points(&g, &[everything], 0.5).is_empty());
}

#[test]
fn frontier_lies_in_the_detect_coverage_annulus() {
    let (ranges, inner) = annulus_ranges(15.0, 10.0);
    assert!(!ranges.is_empty());
    let half_diag = 0.25 * 3f64.sqrt() / 2.0;
    for r in &ranges {
        assert!(*r > inner + 0.125, "range {r} inside the hull inradius {inner}");
        assert!(*r <= 15.0 + half_diag, "range {r} beyond detection");
    }
    assert!(inner > 9.5, "coverage hull inradius {inner}");
}

#[test]
fn degenerate_ranges_leave_a_thin_shell() {
    let eps = 0.01;
    let (ranges, _) = annulus_ranges(10.0 + eps, 10.0);
    let lo = ranges.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ranges.iter().copied().fold(0.0, f64::max);
    assert!(hi - lo <= 0.25 + eps, "shell {lo}..{hi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn detection_only_grows(poses in prop::collection::vec((0.5..7.5f64, 0.5..7.5f64, 0.5..7.5f64), 1..5)) {
        let w = open_box(32);
        let sensor = SensorConfig { n_rays: 800, zeta_detect: 6.0, zeta_coverage: 4.0, ..SensorConfig::default() };
        let mut g = KnowledgeGrid::new(*w.lattice(), 0.4);
        let mut prev = g.cells().to_vec();
        for (x, y, z) in poses {
            let before = g.detected_count();
            let fresh = g.integrate_scan(&simulate_scan(&w, Vec3::new(x, y, z), &sensor).unwrap());
            prop_assert_eq!(g.detected_count(), before + fresh);
            for (a, b) in prev.iter().zip(g.cells()) {
                prop_assert!(*a == Cell::Unknown || a == b);
            }
            prev = g.cells().to_vec();
        }
    }
}
