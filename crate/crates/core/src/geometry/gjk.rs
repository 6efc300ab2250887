//! Support-function distance between convex polyhedra (GJK).

use super::{ConvexPolyhedron, Vec3};

const MAX_ITERS: usize = 128;

/// Euclidean distance between two convex polyhedra; 0 when they overlap.
pub fn polys_distance(a: &ConvexPolyhedron, b: &ConvexPolyhedron) -> f64 {
    let support = |d: Vec3| a.support(d) - b.support(-d);

    let mut v = support(a.centroid() - b.centroid());
    let mut simplex: Vec<Vec3> = vec![v];
    let scale = a.aabb().extent().max_abs() + b.aabb().extent().max_abs();
    let zero_tol = (1e-12 * scale.max(1.0)).powi(2);

    for _ in 0..MAX_ITERS {
        let vv = v.norm_sq();
        if vv <= zero_tol {
            return 0.0;
        }
        let w = support(-v);
        // no support point gets meaningfully closer than v
        if vv - v.dot(w) <= 1e-12 * vv || simplex.contains(&w) {
            break;
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        simplex = reduced;
        v = closest;
        if simplex.len() == 4 {
            return 0.0;
        }
    }
    v.norm()
}

/// True iff the two convex bodies share a point (touching within 1e-9 m counts).
pub fn polys_intersect(a: &ConvexPolyhedron, b: &ConvexPolyhedron) -> bool {
    const TOL: f64 = 1e-9;
    if !a.aabb().expanded(TOL).overlaps(b.aabb()) {
        return false;
    }
    polys_distance(a, b) <= TOL
}

/// Closest point of conv(simplex) to the origin and the smallest sub-simplex
/// that still carries it. A returned simplex of 4 points contains the origin.
fn closest_on_simplex(s: &[Vec3]) -> (Vec3, Vec<Vec3>) {
    match s.len() {
        1 => (s[0], s.to_vec()),
        2 => closest_on_segment(s[0], s[1]),
        3 => closest_on_triangle(s[0], s[1], s[2]),
        4 => closest_on_tetrahedron(s[0], s[1], s[2], s[3]),
        _ => unreachable!("simplex has at most 4 points"),
    }
}

fn closest_on_segment(a: Vec3, b: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let t = (-a).dot(ab);
    if t <= 0.0 {
        return (a, vec![a]);
    }
    let denom = ab.norm_sq();
    if t >= denom {
        return (b, vec![b]);
    }
    (a + ab * (t / denom), vec![a, b])
}

fn closest_on_triangle(a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Vec<Vec3>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, vec![b, c]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_on_tetrahedron(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> (Vec3, Vec<Vec3>) {
    // origin outside the plane of face (p, q, r), relative to the opposite vertex s
    let outside = |p: Vec3, q: Vec3, r: Vec3, s: Vec3| {
        let n = (q - p).cross(r - p);
        let sign_o = (-p).dot(n);
        let sign_s = (s - p).dot(n);
        sign_o * sign_s < 0.0
    };
    let six_vol = (b - a).dot((c - a).cross(d - a));
    let scale = (b - a).norm() * (c - a).norm() * (d - a).norm();
    // a flat simplex cannot enclose the origin; fall back to its faces
    let flat = six_vol.abs() <= 1e-12 * scale;
    let mut best: Option<(Vec3, Vec<Vec3>)> = None;
    for (p, q, r, s) in [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)] {
        if flat || outside(p, q, r, s) {
            let cand = closest_on_triangle(p, q, r);
            if best.as_ref().is_none_or(|(bp, _)| cand.0.norm_sq() < bp.norm_sq()) {
                best = Some(cand);
            }
        }
    }
    best.unwrap_or((Vec3::ZERO, vec![a, b, c, d]))
}
