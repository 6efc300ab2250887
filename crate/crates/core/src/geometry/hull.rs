use std::collections::{HashMap, VecDeque};

use robust::{orient3d, Coord3D};
use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Segment, Vec3, HULL_EPS};

/// Oriented plane `normal · x = offset` with a unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    fn through(a: Vec3, b: Vec3, c: Vec3) -> Option<Plane> {
        let normal = (b - a).cross(c - a).normalized()?;
        Some(Plane { normal, offset: normal.dot(a) })
    }

    /// Positive outside, negative inside.
    #[inline]
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// A closed, triangulated convex polyhedron with outward-oriented faces.
///
/// Built only through [`build_hull`], so every instance satisfies the
/// invariants: closed 2-manifold, positive volume, every vertex on or inside
/// every face plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolyhedron {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    planes: Vec<Plane>,
    centroid: Vec3,
    volume: f64,
    aabb: Aabb,
}

impl ConvexPolyhedron {
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    pub fn centroid_and_volume(&self) -> (Vec3, f64) {
        (self.centroid, self.volume)
    }

    /// Undirected edges as sorted index pairs, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// V − E + F; 2 for every valid hull.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// True iff `q` is on the inner side of every face plane, within `tol`.
    pub fn contains(&self, q: Vec3, tol: f64) -> bool {
        if !self.aabb.expanded(tol).contains(q) {
            return false;
        }
        self.planes.iter().all(|pl| pl.signed_distance(q) <= tol)
    }

    /// The closed interval of `x` for which `(x, y, z)` is contained within
    /// `tol`, if any. Used to rasterize hulls row by row.
    pub fn x_interval(&self, y: f64, z: f64, tol: f64) -> Option<(f64, f64)> {
        let bb = self.aabb.expanded(tol);
        if y < bb.min.y || y > bb.max.y || z < bb.min.z || z > bb.max.z {
            return None;
        }
        let (mut lo, mut hi) = (bb.min.x, bb.max.x);
        for pl in &self.planes {
            let rhs = pl.offset + tol - pl.normal.y * y - pl.normal.z * z;
            let nx = pl.normal.x;
            if nx.abs() < 1e-12 {
                if rhs < 0.0 {
                    return None;
                }
            } else if nx > 0.0 {
                hi = hi.min(rhs / nx);
            } else {
                lo = lo.max(rhs / nx);
            }
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }

    /// True iff the segment meets the closed polyhedron (expanded by `tol`).
    ///
    /// Parametric clipping against every face plane. Endpoints are put in a
    /// canonical order first so the answer is exactly symmetric under
    /// endpoint swap. Grazing contact within `tol` counts as intersecting.
    pub fn segment_intersects(&self, seg: &Segment, tol: f64) -> bool {
        let (a, b) = if seg.a.lex_cmp(&seg.b).is_le() { (seg.a, seg.b) } else { (seg.b, seg.a) };
        let seg_box = Aabb { min: a.min(b), max: a.max(b) };
        if !self.aabb.expanded(tol).overlaps(&seg_box) {
            return false;
        }
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for pl in &self.planes {
            // inside when n·(a + t d) - offset <= tol
            let num = pl.offset + tol - pl.normal.dot(a);
            let den = pl.normal.dot(d);
            if den.abs() < 1e-15 {
                if num < 0.0 {
                    return false;
                }
                continue;
            }
            let t = num / den;
            if den > 0.0 {
                t1 = t1.min(t);
            } else {
                t0 = t0.max(t);
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }

    /// Support point: the vertex maximizing `dir · v`.
    pub fn support(&self, dir: Vec3) -> Vec3 {
        let mut best = self.vertices[0];
        let mut best_d = best.dot(dir);
        for v in &self.vertices[1..] {
            let d = v.dot(dir);
            if d > best_d {
                best_d = d;
                best = *v;
            }
        }
        best
    }
}

struct FaceRec {
    v: [u32; 3],
    plane: Plane,
    alive: bool,
}

/// Builds the convex hull of `points` incrementally.
///
/// Interior points and points lying on the hull surface without being a
/// corner are dropped, so the vertex list holds extreme points only. Vertex
/// order follows input order.
pub fn build_hull(points: &[Vec3]) -> Result<ConvexPolyhedron, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite(i));
    }
    let raw = incremental_hull(points)?;
    let redundant = redundant_vertices(points, &raw);
    if redundant.is_empty() {
        return Ok(finish(points, raw));
    }
    let keep: Vec<Vec3> =
        used_indices(&raw).into_iter().filter(|i| !redundant.contains(i)).map(|i| points[i as usize]).collect();
    let raw = incremental_hull(&keep)?;
    Ok(finish(&keep, raw))
}

fn incremental_hull(points: &[Vec3]) -> Result<Vec<[u32; 3]>, GeometryError> {
    let bb = Aabb::from_points(points).expect("nonempty");
    let scale = bb.extent().max_abs().max(bb.min.max_abs()).max(bb.max.max_abs());
    let extent = bb.extent().max_abs();
    if extent <= 0.0 {
        return Err(GeometryError::Degenerate("coincident points"));
    }
    let eps = HULL_EPS * scale.max(1.0);

    let [i0, i1, i2, i3] = initial_simplex(points, eps)?;

    let mut faces: Vec<FaceRec> = Vec::with_capacity(points.len() * 2);
    let mut edges: HashMap<(u32, u32), usize> = HashMap::with_capacity(points.len() * 6);

    let mut tri = [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]];
    let p3_side = Plane::through(points[i0 as usize], points[i1 as usize], points[i2 as usize])
        .expect("non-collinear")
        .signed_distance(points[i3 as usize]);
    if p3_side > 0.0 {
        for t in &mut tri {
            t.swap(1, 2);
        }
    }
    for t in tri {
        add_face(&mut faces, &mut edges, points, t);
    }

    let mut visible = Vec::new();
    let mut queue = VecDeque::new();
    let mut mark: Vec<u32> = Vec::new();
    let mut stamp = 0u32;

    for (pi, &p) in points.iter().enumerate() {
        let pi = pi as u32;
        if pi == i0 || pi == i1 || pi == i2 || pi == i3 {
            continue;
        }
        let mut best = None;
        let mut best_d = eps;
        for (fi, f) in faces.iter().enumerate() {
            if f.alive {
                let d = f.plane.signed_distance(p);
                if d > best_d {
                    best_d = d;
                    best = Some(fi);
                }
            }
        }
        let Some(seed) = best.filter(|&f| strictly_above(points, faces[f].v, p)) else { continue };

        stamp += 1;
        mark.resize(faces.len(), 0);
        visible.clear();
        queue.clear();
        queue.push_back(seed);
        mark[seed] = stamp;
        while let Some(fi) = queue.pop_front() {
            visible.push(fi);
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let nb = edges[&(b, a)];
                if mark[nb] != stamp && strictly_above(points, faces[nb].v, p) {
                    mark[nb] = stamp;
                    queue.push_back(nb);
                }
            }
        }

        let mut horizon = Vec::new();
        for &fi in &visible {
            let v = faces[fi].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let nb = edges[&(b, a)];
                if mark[nb] != stamp {
                    horizon.push((a, b));
                }
            }
        }
        for &fi in &visible {
            faces[fi].alive = false;
            let v = faces[fi].v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
        }
        for (a, b) in horizon {
            add_face(&mut faces, &mut edges, points, [a, b, pi]);
        }
    }

    Ok(faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect())
}

/// Exact test that `p` lies on the outer side of the triangle's plane. Exact
/// signs keep every visible set a disk, so horizons stay simple loops.
fn strictly_above(points: &[Vec3], v: [u32; 3], p: Vec3) -> bool {
    let c = |q: Vec3| Coord3D { x: q.x, y: q.y, z: q.z };
    let [a, b, d] = v.map(|i| c(points[i as usize]));
    orient3d(a, b, d, c(p)) < 0.0
}

fn add_face(faces: &mut Vec<FaceRec>, edges: &mut HashMap<(u32, u32), usize>, points: &[Vec3], v: [u32; 3]) {
    let [a, b, c] = v.map(|i| points[i as usize]);
    let plane = best_plane(a, b, c);
    let fi = faces.len();
    faces.push(FaceRec { v, plane, alive: true });
    for k in 0..3 {
        edges.insert((v[k], v[(k + 1) % 3]), fi);
    }
}

/// Plane through a triangle, computed from the corner with the widest angle
/// so sliver triangles keep a usable normal.
fn best_plane(a: Vec3, b: Vec3, c: Vec3) -> Plane {
    let (lab, lbc, lca) = ((b - a).norm_sq(), (c - b).norm_sq(), (a - c).norm_sq());
    // corner opposite the longest edge; cyclic order preserves orientation
    let n = if lbc >= lab && lbc >= lca {
        (b - a).cross(c - a)
    } else if lca >= lab {
        (c - b).cross(a - b)
    } else {
        (a - c).cross(b - c)
    };
    let normal = n.normalized().unwrap_or(Vec3::Z);
    let offset = (normal.dot(a) + normal.dot(b) + normal.dot(c)) / 3.0;
    Plane { normal, offset }
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[u32; 4], GeometryError> {
    // pick the extreme pair along the axis of largest spread
    let axis_of = |p: &Vec3, k: usize| [p.x, p.y, p.z][k];
    let mut best_axis = (0usize, 0u32, 0u32, -1.0f64);
    for k in 0..3 {
        let (mut lo, mut hi) = (0usize, 0usize);
        for (i, p) in points.iter().enumerate() {
            if axis_of(p, k) < axis_of(&points[lo], k) {
                lo = i;
            }
            if axis_of(p, k) > axis_of(&points[hi], k) {
                hi = i;
            }
        }
        let spread = axis_of(&points[hi], k) - axis_of(&points[lo], k);
        if spread > best_axis.3 {
            best_axis = (k, lo as u32, hi as u32, spread);
        }
    }
    let (_, i0, i1, _) = best_axis;
    let (a, b) = (points[i0 as usize], points[i1 as usize]);
    if a.distance(b) <= eps {
        return Err(GeometryError::Degenerate("coincident points"));
    }
    let ab = (b - a).normalized().expect("distinct");
    let mut i2 = 0u32;
    let mut d2 = -1.0;
    for (i, p) in points.iter().enumerate() {
        let d = (*p - a).cross(ab).norm();
        if d > d2 {
            d2 = d;
            i2 = i as u32;
        }
    }
    if d2 <= eps {
        return Err(GeometryError::Degenerate("collinear points"));
    }
    let plane = Plane::through(a, b, points[i2 as usize]).expect("non-collinear");
    let mut i3 = 0u32;
    let mut d3 = -1.0;
    for (i, p) in points.iter().enumerate() {
        let d = plane.signed_distance(*p).abs();
        if d > d3 {
            d3 = d;
            i3 = i as u32;
        }
    }
    if d3 <= eps {
        return Err(GeometryError::Degenerate("coplanar points"));
    }
    Ok([i0, i1, i2, i3])
}

fn used_indices(faces: &[[u32; 3]]) -> Vec<u32> {
    let mut used: Vec<u32> = faces.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    used
}

/// Hull vertices that are not corners: every incident face lies in at most
/// two distinct planes, so the vertex sits inside a face or on an edge.
fn redundant_vertices(points: &[Vec3], faces: &[[u32; 3]]) -> Vec<u32> {
    let mut incident: HashMap<u32, Vec<Vec3>> = HashMap::new();
    for f in faces {
        let [a, b, c] = f.map(|i| points[i as usize]);
        let n = best_plane(a, b, c).normal;
        for &v in f {
            incident.entry(v).or_default().push(n);
        }
    }
    let mut out: Vec<u32> = incident
        .into_iter()
        .filter(|(_, normals)| {
            let mut distinct: Vec<Vec3> = Vec::with_capacity(3);
            for n in normals {
                if !distinct.iter().any(|d| d.dot(*n) > 1.0 - 1e-12) {
                    distinct.push(*n);
                    if distinct.len() >= 3 {
                        return false;
                    }
                }
            }
            true
        })
        .map(|(v, _)| v)
        .collect();
    out.sort_unstable();
    out
}

fn finish(points: &[Vec3], faces: Vec<[u32; 3]>) -> ConvexPolyhedron {
    let used = used_indices(&faces);
    let mut remap = HashMap::with_capacity(used.len());
    let vertices: Vec<Vec3> = used
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            remap.insert(old, new as u32);
            points[old as usize]
        })
        .collect();
    let faces: Vec<[u32; 3]> = faces.iter().map(|f| f.map(|i| remap[&i])).collect();
    let planes: Vec<Plane> = faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            best_plane(a, b, c)
        })
        .collect();

    // divergence theorem about the vertex mean, for conditioning
    let origin = vertices.iter().fold(Vec3::ZERO, |acc, v| acc + *v) / vertices.len() as f64;
    let mut six_vol = 0.0;
    let mut weighted = Vec3::ZERO;
    for f in &faces {
        let [a, b, c] = f.map(|i| vertices[i as usize] - origin);
        let v6 = a.dot(b.cross(c));
        six_vol += v6;
        weighted += (a + b + c) * v6;
    }
    let volume = six_vol / 6.0;
    let centroid = origin + weighted / (4.0 * six_vol);
    let aabb = Aabb::from_points(&vertices).expect("nonempty");
    ConvexPolyhedron { vertices, faces, planes, centroid, volume, aabb }
}
