//! Plain-text occupancy grid format.
//!
//! ```text
//! TOPEX-GRID 1
//! resolution 0.25
//! origin 0 0 0
//! dims 160 160 20
//! spawn 6.5 6.5 2.5
//! runs 3
//! 1:3200 0:12 1:509788
//! end
//! ```
//!
//! The payload is run-length encoded occupancy (`1` occupied, `0` free) in
//! lattice index order, x fastest then y then z. Run tokens may be split
//! across any number of lines. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use super::{GroundTruthWorld, Lattice, WorldError};
use crate::geometry::Vec3;

const MAGIC: &str = "TOPEX-GRID 1";
const RUNS_PER_LINE: usize = 16;

pub fn write_world(world: &GroundTruthWorld) -> String {
    let l = world.lattice();
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &o in world.occupancy() {
        match runs.last_mut() {
            Some((v, n)) if *v == o => *n += 1,
            _ => runs.push((o, 1)),
        }
    }
    let mut s = String::new();
    let o = l.origin;
    let p = world.spawn();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "resolution {}", l.resolution);
    let _ = writeln!(s, "origin {} {} {}", o.x, o.y, o.z);
    let _ = writeln!(s, "dims {} {} {}", l.dims[0], l.dims[1], l.dims[2]);
    let _ = writeln!(s, "spawn {} {} {}", p.x, p.y, p.z);
    let _ = writeln!(s, "runs {}", runs.len());
    for chunk in runs.chunks(RUNS_PER_LINE) {
        let line: Vec<String> = chunk.iter().map(|(v, n)| format!("{}:{n}", u8::from(*v))).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s.push_str("end\n");
    s
}

pub fn write_world_file(world: &GroundTruthWorld, path: &Path) -> Result<(), WorldError> {
    std::fs::write(path, write_world(world))?;
    Ok(())
}

pub fn read_world_file(path: &Path) -> Result<GroundTruthWorld, WorldError> {
    read_world(&std::fs::read_to_string(path)?)
}

pub fn read_world(text: &str) -> Result<GroundTruthWorld, WorldError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| WorldError::Format { line, msg };

    let (n, magic) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if magic != MAGIC {
        return Err(err(n, format!("expected '{MAGIC}', found '{magic}'")));
    }
    let mut header = |key: &str, count: usize| -> Result<(usize, Vec<String>), WorldError> {
        let (n, line) = lines.next().ok_or_else(|| err(0, format!("missing '{key}' line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(err(n, format!("expected '{key}'")));
        }
        let vals: Vec<String> = parts.map(str::to_owned).collect();
        if vals.len() != count {
            return Err(err(n, format!("'{key}' takes {count} values, got {}", vals.len())));
        }
        Ok((n, vals))
    };
    fn num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T, WorldError> {
        s.parse().map_err(|_| WorldError::Format { line: n, msg: format!("bad number '{s}'") })
    }

    let (n, v) = header("resolution", 1)?;
    let resolution: f64 = num(n, &v[0])?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(err(n, "resolution must be positive".into()));
    }
    let (n, v) = header("origin", 3)?;
    let origin = Vec3::new(num(n, &v[0])?, num(n, &v[1])?, num(n, &v[2])?);
    let (n, v) = header("dims", 3)?;
    let dims: [usize; 3] = [num(n, &v[0])?, num(n, &v[1])?, num(n, &v[2])?];
    if dims.contains(&0) {
        return Err(err(n, "dims must be >= 1".into()));
    }
    let (n, v) = header("spawn", 3)?;
    let spawn = Vec3::new(num(n, &v[0])?, num(n, &v[1])?, num(n, &v[2])?);
    if !origin.is_finite() || !spawn.is_finite() {
        return Err(err(n, "non-finite coordinate".into()));
    }
    let (n_runs_line, v) = header("runs", 1)?;
    let n_runs: usize = num(n_runs_line, &v[0])?;

    let lattice = Lattice::new(resolution, origin, dims);
    let mut occupied = Vec::with_capacity(lattice.len());
    let mut seen_runs = 0;
    let mut last = n_runs_line;
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        last = n;
        if line == "end" {
            ended = true;
            break;
        }
        for tok in line.split_whitespace() {
            let (val, len) = tok.split_once(':').ok_or_else(|| err(n, format!("bad run '{tok}'")))?;
            let val = match val {
                "0" => false,
                "1" => true,
                _ => return Err(err(n, format!("bad run value '{val}'"))),
            };
            let len: usize = num(n, len)?;
            if occupied.len() + len > lattice.len() {
                return Err(err(n, "runs exceed lattice size".into()));
            }
            occupied.resize(occupied.len() + len, val);
            seen_runs += 1;
        }
    }
    if !ended {
        return Err(err(last, "missing 'end'".into()));
    }
    if seen_runs != n_runs {
        return Err(err(last, format!("header declares {n_runs} runs, found {seen_runs}")));
    }
    if occupied.len() != lattice.len() {
        return Err(err(last, format!("runs cover {} voxels, lattice has {}", occupied.len(), lattice.len())));
    }
    let sv = lattice.voxel_of(spawn);
    if !lattice.in_bounds(sv) || occupied[lattice.index(sv)] {
        return Err(err(last, format!("spawn {spawn:?} is not in free space")));
    }
    Ok(GroundTruthWorld::from_occupancy(lattice, occupied, spawn))
}
