//! Viewer-facing text exports: Wavefront OBJ for hulls, ASCII PLY for point
//! sets and polylines. Coordinates are meters in a right-handed frame.

use std::fmt::Write as _;

use crate::geometry::{ConvexPolyhedron, Vec3};
use crate::knowledge::{Cell, FrontierPoints, KnowledgeGrid};

/// Material library for [`hulls_obj`]: coverage hulls emerald, DER hulls red.
pub const HULL_MTL: &str = "\
newmtl coverage
Kd 0.31 0.78 0.47
d 0.35
newmtl der
Kd 0.86 0.16 0.16
d 0.6
";

pub const FREE_RGB: [u8; 3] = [170, 170, 170];
pub const OCCUPIED_RGB: [u8; 3] = [60, 60, 200];
pub const FRONTIER_RGB: [u8; 3] = [220, 40, 40];

/// One OBJ object per hull, faces outward (counter-clockwise seen from
/// outside). `mtllib` names the material file written alongside.
pub fn hulls_obj(coverage: &[&ConvexPolyhedron], ders: &[&ConvexPolyhedron], mtllib: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(m) = mtllib {
        let _ = writeln!(s, "mtllib {m}");
    }
    let mut base = 1usize;
    let groups = coverage.iter().map(|h| ("coverage", h)).chain(ders.iter().map(|h| ("der", h)));
    for (k, (material, hull)) in groups.enumerate() {
        let _ = writeln!(s, "o {material}_{k}");
        let _ = writeln!(s, "usemtl {material}");
        for v in hull.vertices() {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in hull.faces() {
            let _ = writeln!(s, "f {} {} {}", base + f[0] as usize, base + f[1] as usize, base + f[2] as usize);
        }
        base += hull.vertices().len();
    }
    s
}

fn ply_header(s: &mut String, n_vertex: usize, color: bool, n_edge: usize) {
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {n_vertex}");
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if color {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if n_edge > 0 {
        let _ = writeln!(s, "element edge {n_edge}");
        s.push_str("property int vertex1\nproperty int vertex2\n");
    }
    s.push_str("end_header\n");
}

/// Colored point cloud.
pub fn points_ply(points: &[(Vec3, [u8; 3])]) -> String {
    let mut s = String::new();
    ply_header(&mut s, points.len(), true, 0);
    for (p, c) in points {
        let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    s
}

/// Polyline as vertices joined by consecutive edges.
pub fn polyline_ply(points: &[Vec3]) -> String {
    let mut s = String::new();
    let edges = points.len().saturating_sub(1);
    ply_header(&mut s, points.len(), false, edges);
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    for k in 0..edges {
        let _ = writeln!(s, "{} {}", k, k + 1);
    }
    s
}

/// Detected voxel centers colored by class, then frontier points. Free voxels
/// are included only on request since they dominate the count.
pub fn belief_points(grid: &KnowledgeGrid, frontier: &FrontierPoints, include_free: bool) -> Vec<(Vec3, [u8; 3])> {
    let l = grid.lattice();
    let mut out: Vec<(Vec3, [u8; 3])> = grid
        .cells()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            Cell::Occupied => Some((l.center_of_index(i), OCCUPIED_RGB)),
            Cell::Free if include_free => Some((l.center_of_index(i), FREE_RGB)),
            _ => None,
        })
        .collect();
    out.extend(frontier.points.iter().map(|p| (*p, FRONTIER_RGB)));
    out
}
