//! Procedural world generators. Every generator is a pure function of the
//! spec; the RNG is a seeded ChaCha stream so output is bit-identical across
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{flood_fill_free, io, GroundTruthWorld, Lattice, WorldError, WorldKind, WorldSpec};
use crate::geometry::Vec3;

/// Radius of the free ball guaranteed around the spawn point.
pub const SPAWN_CLEARANCE: f64 = 1.0;

/// Nominal cell pitch of the corridor-rooms layout, meters.
const ROOM_CELL: f64 = 13.0;

pub fn generate_world(spec: &WorldSpec) -> Result<GroundTruthWorld, WorldError> {
    if spec.kind == WorldKind::FromFile {
        let path = spec.file.as_ref().ok_or_else(|| WorldError::InvalidSpec {
            key: "world.file",
            reason: "from-file worlds need a file path".into(),
        })?;
        let world = io::read_world_file(path)?;
        return Ok(match spec.spawn {
            Some(s) => finalize(*world.lattice(), world.occupancy().to_vec(), s)?,
            None => world,
        });
    }
    let lattice = validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut grid = Carver::new(lattice);
    let default_spawn = match spec.kind {
        WorldKind::CorridorRooms => corridor_rooms(&mut grid, &mut rng),
        WorldKind::BranchingCave => branching_cave(&mut grid, &mut rng),
        WorldKind::EmptyBox => {
            grid.carve_box(grid.lo, grid.hi);
            (grid.lo + grid.hi) / 2.0
        }
        WorldKind::FromFile => unreachable!(),
    };
    finalize(lattice, grid.occupied, spec.spawn.unwrap_or(default_spawn))
}

fn validate(spec: &WorldSpec) -> Result<Lattice, WorldError> {
    let bad = |key: &'static str, reason: String| Err(WorldError::InvalidSpec { key, reason });
    if !(spec.resolution > 0.0 && spec.resolution.is_finite()) {
        return bad("world.resolution", format!("must be positive, got {}", spec.resolution));
    }
    for (key, v) in [("world.size.x", spec.size.x), ("world.size.y", spec.size.y), ("world.size.z", spec.size.z)] {
        if !(v > 0.0 && v.is_finite()) {
            return bad(key, format!("must be positive, got {v}"));
        }
        if v / spec.resolution < 3.0 {
            return bad(key, format!("{v} m is too small for a shell at resolution {}", spec.resolution));
        }
    }
    let dims = [
        (spec.size.x / spec.resolution).round() as usize,
        (spec.size.y / spec.resolution).round() as usize,
        (spec.size.z / spec.resolution).round() as usize,
    ];
    Ok(Lattice::new(spec.resolution, Vec3::ZERO, dims))
}

/// Clears the spawn ball, seals pockets unreachable from spawn, and forces
/// the shell occupied.
fn finalize(lattice: Lattice, mut occupied: Vec<bool>, spawn: Vec3) -> Result<GroundTruthWorld, WorldError> {
    let sv = lattice.voxel_of(spawn);
    if !lattice.in_bounds(sv) || lattice.is_boundary(sv) {
        return Err(WorldError::InvalidSpec {
            key: "world.spawn",
            reason: format!("{spawn:?} is not inside the world interior"),
        });
    }
    for off in lattice.ball_offsets(SPAWN_CLEARANCE) {
        let v = super::lattice::offset(sv, off);
        if lattice.in_bounds(v) && !lattice.is_boundary(v) {
            occupied[lattice.index(v)] = false;
        }
    }
    let world = GroundTruthWorld::from_occupancy(lattice, occupied, spawn);
    let reach = flood_fill_free(&lattice, world.occupancy(), sv);
    let sealed: Vec<bool> = world.occupancy().iter().zip(&reach).map(|(o, r)| *o || !*r).collect();
    Ok(GroundTruthWorld::from_occupancy(lattice, sealed, spawn))
}

struct Carver {
    lattice: Lattice,
    occupied: Vec<bool>,
    /// Interior bounds (inside the one-voxel shell).
    lo: Vec3,
    hi: Vec3,
}

impl Carver {
    fn new(lattice: Lattice) -> Self {
        let r = lattice.resolution;
        Self {
            lattice,
            occupied: vec![true; lattice.len()],
            lo: lattice.origin + Vec3::splat(r),
            hi: lattice.origin + lattice.extent() - Vec3::splat(r),
        }
    }

    /// Frees every voxel whose center satisfies `inside`, scanning only the
    /// voxels of the box `[lo, hi]`.
    fn carve_where(&mut self, lo: Vec3, hi: Vec3, inside: impl Fn(Vec3) -> bool) {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi);
        let a = self.lattice.voxel_of(lo);
        let b = self.lattice.voxel_of(hi);
        for z in a[2]..=b[2] {
            for y in a[1]..=b[1] {
                for x in a[0]..=b[0] {
                    let v = [x, y, z];
                    if self.lattice.in_bounds(v) && !self.lattice.is_boundary(v) && inside(self.lattice.center(v)) {
                        let i = self.lattice.index(v);
                        self.occupied[i] = false;
                    }
                }
            }
        }
    }

    fn carve_box(&mut self, lo: Vec3, hi: Vec3) {
        self.carve_where(lo, hi, |c| {
            c.x >= lo.x && c.y >= lo.y && c.z >= lo.z && c.x < hi.x && c.y < hi.y && c.z < hi.z
        });
    }

    fn carve_ellipsoid(&mut self, c: Vec3, radii: Vec3) {
        self.carve_where(c - radii, c + radii, |p| {
            let d = p - c;
            (d.x / radii.x).powi(2) + (d.y / radii.y).powi(2) + (d.z / radii.z).powi(2) <= 1.0
        });
    }
}

#[derive(Clone, Copy)]
struct Room {
    lo: Vec3,
    hi: Vec3,
}

impl Room {
    fn center(&self) -> Vec3 {
        (self.lo + self.hi) / 2.0
    }
}

/// Rooms on a coarse cell grid joined by a random spanning tree of straight
/// corridors plus a few extra loops.
fn corridor_rooms(g: &mut Carver, rng: &mut ChaCha8Rng) -> Vec3 {
    let span = g.hi - g.lo;
    let ncx = ((span.x / ROOM_CELL).round() as usize).max(1);
    let ncy = ((span.y / ROOM_CELL).round() as usize).max(1);
    let cw = span.x / ncx as f64;
    let ch = span.y / ncy as f64;
    let height = span.z;

    let mut rooms = Vec::with_capacity(ncx * ncy);
    for j in 0..ncy {
        for i in 0..ncx {
            let w = cw * rng.random_range(0.55..0.8);
            let d = ch * rng.random_range(0.55..0.8);
            let cx = g.lo.x + cw * (i as f64 + 0.5) + cw * rng.random_range(-0.1..0.1);
            let cy = g.lo.y + ch * (j as f64 + 0.5) + ch * rng.random_range(-0.1..0.1);
            let cell_lo = Vec3::new(g.lo.x + cw * i as f64, g.lo.y + ch * j as f64, g.lo.z);
            let cell_hi = Vec3::new(cell_lo.x + cw, cell_lo.y + ch, g.hi.z);
            let lo = Vec3::new((cx - w / 2.0).max(cell_lo.x + 0.5), (cy - d / 2.0).max(cell_lo.y + 0.5), g.lo.z);
            let hi =
                Vec3::new((cx + w / 2.0).min(cell_hi.x - 0.5), (cy + d / 2.0).min(cell_hi.y - 0.5), g.lo.z + height);
            rooms.push(Room { lo, hi });
        }
    }
    for r in &rooms {
        g.carve_box(r.lo, r.hi);
    }

    // randomized Kruskal over the 4-neighbor cell graph
    let mut edges = Vec::new();
    for j in 0..ncy {
        for i in 0..ncx {
            let a = j * ncx + i;
            if i + 1 < ncx {
                edges.push((a, a + 1));
            }
            if j + 1 < ncy {
                edges.push((a, a + ncx));
            }
        }
    }
    for k in (1..edges.len()).rev() {
        let m = rng.random_range(0..=k);
        edges.swap(k, m);
    }
    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let extra = rng.random_bool(0.25);
        if ra != rb || extra {
            parent[ra] = rb;
            let width = rng.random_range(2.0..3.0);
            let corridor_h = rng.random_range(2.5..3.5f64).min(height);
            corridor(g, &rooms[a], &rooms[b], width, corridor_h);
        }
    }
    let first = rooms[0].center();
    Vec3::new(first.x, first.y, g.lo.z + height / 2.0)
}

/// Straight corridor between two rooms adjacent along x or y.
fn corridor(g: &mut Carver, a: &Room, b: &Room, width: f64, height: f64) {
    let (ca, cb) = (a.center(), b.center());
    let z0 = g.lo.z;
    if (cb.x - ca.x).abs() >= (cb.y - ca.y).abs() {
        let ylo = a.lo.y.max(b.lo.y);
        let yhi = a.hi.y.min(b.hi.y);
        let y = (ylo + yhi) / 2.0;
        let w = width.min(yhi - ylo).max(1.0);
        let (x0, x1) = (ca.x.min(cb.x), ca.x.max(cb.x));
        g.carve_box(Vec3::new(x0, y - w / 2.0, z0), Vec3::new(x1, y + w / 2.0, z0 + height));
    } else {
        let xlo = a.lo.x.max(b.lo.x);
        let xhi = a.hi.x.min(b.hi.x);
        let x = (xlo + xhi) / 2.0;
        let w = width.min(xhi - xlo).max(1.0);
        let (y0, y1) = (ca.y.min(cb.y), ca.y.max(cb.y));
        g.carve_box(Vec3::new(x - w / 2.0, y0, z0), Vec3::new(x + w / 2.0, y1, z0 + height));
    }
}

/// Random-walk tunnels of overlapping ellipsoids with side branches and the
/// occasional chamber.
fn branching_cave(g: &mut Carver, rng: &mut ChaCha8Rng) -> Vec3 {
    let span = g.hi - g.lo;
    let margin = Vec3::new(2.5, 2.5, 1.6).min(span / 2.0 - Vec3::splat(1e-3)).max(Vec3::ZERO);
    let lo = g.lo + margin;
    let hi = g.hi - margin;
    let mid_z = (g.lo.z + g.hi.z) / 2.0;
    let spawn = Vec3::new(lo.x + 0.5, (lo.y + hi.y) / 2.0, mid_z);

    // total carved path length scales with floor area
    let budget = (span.x * span.y / 8.0).max(20.0);
    let step = 0.5;
    let mut carved = 0.0;
    let mut stack = vec![(spawn, 0.0f64, rng.random_range(25.0..45.0f64))];
    while let Some((mut p, mut yaw, len)) = stack.pop() {
        let mut pitch = 0.0f64;
        let mut walked = 0.0;
        while walked < len && carved < budget {
            let rh = rng.random_range(1.1..1.7);
            let rv = rng.random_range(0.9..1.3f64).min(span.z / 2.0);
            g.carve_ellipsoid(p, Vec3::new(rh, rh, rv));
            if rng.random_bool(0.015) {
                let r = rng.random_range(2.5..3.5);
                g.carve_ellipsoid(p, Vec3::new(r, r, (r * 0.6).min(span.z / 2.0)));
            }
            if rng.random_bool(0.03) {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let by = yaw + side * rng.random_range(0.8..1.6);
                stack.push((p, by, rng.random_range(8.0..20.0)));
            }
            yaw += rng.random_range(-0.35..0.35);
            pitch = (pitch + rng.random_range(-0.1..0.1)).clamp(-0.2, 0.2);
            let mut next = p + Vec3::new(yaw.cos(), yaw.sin(), pitch) * step;
            // steer back inside the margins
            if next.x < lo.x || next.x > hi.x {
                yaw = std::f64::consts::PI - yaw;
            }
            if next.y < lo.y || next.y > hi.y {
                yaw = -yaw;
            }
            if next.z < lo.z || next.z > hi.z {
                pitch = -pitch;
            }
            next = p + Vec3::new(yaw.cos(), yaw.sin(), pitch) * step;
            p = next.max(lo).min(hi);
            walked += step;
            carved += step;
        }
        if carved >= budget {
            break;
        }
    }
    spawn
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: WorldKind, seed: u64) -> WorldSpec {
        WorldSpec { kind, seed, size: Vec3::new(40.0, 40.0, 5.0), resolution: 0.25, spawn: None, file: None }
    }

    #[test]
    fn corridor_rooms_is_deterministic_and_connected() {
        let a = generate_world(&spec(WorldKind::CorridorRooms, 7)).unwrap();
        let b = generate_world(&spec(WorldKind::CorridorRooms, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate_world(&spec(WorldKind::CorridorRooms, 8)).unwrap();
        assert_ne!(a.occupancy(), c.occupancy());
        let reach = a.reachable_free().iter().filter(|r| **r).count();
        assert_eq!(reach, a.count_free());
        assert!(a.count_free() > a.lattice().len() / 5);
    }

    #[test]
    fn spawn_has_clearance() {
        for kind in [WorldKind::CorridorRooms, WorldKind::BranchingCave, WorldKind::EmptyBox] {
            let w = generate_world(&spec(kind, 3)).unwrap();
            let sv = w.lattice().voxel_of(w.spawn());
            for off in w.lattice().ball_offsets(SPAWN_CLEARANCE) {
                assert!(!w.is_occupied(super::super::lattice::offset(sv, off)), "{kind}");
            }
        }
    }

    #[test]
    fn empty_box_interior_is_free() {
        let mut s = spec(WorldKind::EmptyBox, 0);
        s.size = Vec3::new(3.0, 2.0, 2.0);
        let w = generate_world(&s).unwrap();
        let [nx, ny, nz] = w.lattice().dims;
        assert_eq!(w.count_free(), (nx - 2) * (ny - 2) * (nz - 2));
    }

    #[test]
    fn invalid_sizes_name_the_key() {
        let mut s = spec(WorldKind::EmptyBox, 0);
        s.size.y = -1.0;
        match generate_world(&s) {
            Err(WorldError::InvalidSpec { key, .. }) => assert_eq!(key, "world.size.y"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
