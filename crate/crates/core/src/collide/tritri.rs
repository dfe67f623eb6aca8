//! Exact triangle–triangle intersection and distance.

use crate::geometry::{closest_point_on_triangle, Vec3};

/// Plane-distance magnitude (mm) below which a vertex counts as on the plane.
pub const EPS: f64 = 1e-9;

pub type Tri = [Vec3; 3];

/// True when the closed triangles share at least one point.
///
/// Each triangle is cut by the other's plane; the two cut segments lie on
/// the planes' common line and overlap iff the triangles intersect. Coplanar
/// pairs fall back to a 2-d overlap test.
pub fn intersects(a: &Tri, b: &Tri) -> bool {
    let nb = (b[1] - b[0]).cross(&(b[2] - b[0]));
    let na = (a[1] - a[0]).cross(&(a[2] - a[0]));
    let (la, lb) = (na.norm(), nb.norm());
    if la == 0.0 || lb == 0.0 {
        return false;
    }
    let (na, nb) = (na / la, nb / lb);

    let da = a.map(|p| nb.dot(&(p - b[0]))).map(snap);
    if same_strict_side(&da) {
        return false;
    }
    let db = b.map(|p| na.dot(&(p - a[0]))).map(snap);
    if same_strict_side(&db) {
        return false;
    }
    if da.iter().all(|&d| d == 0.0) {
        return coplanar_overlap(a, b, &na);
    }

    let dir = na.cross(&nb);
    if dir.norm_squared() < EPS * EPS {
        // Nearly parallel but not classified coplanar: the sign tests above
        // already proved straddling, treat as coplanar overlap.
        return coplanar_overlap(a, b, &na);
    }
    let Some((a0, a1)) = cut_interval(a, &da, &dir) else {
        return false;
    };
    let Some((b0, b1)) = cut_interval(b, &db, &dir) else {
        return false;
    };
    a0 <= b1 + EPS && b0 <= a1 + EPS
}

#[inline]
fn snap(d: f64) -> f64 {
    if d.abs() <= EPS {
        0.0
    } else {
        d
    }
}

#[inline]
fn same_strict_side(d: &[f64; 3]) -> bool {
    (d[0] > 0.0 && d[1] > 0.0 && d[2] > 0.0) || (d[0] < 0.0 && d[1] < 0.0 && d[2] < 0.0)
}

/// Projection interval onto `dir` of the triangle's intersection with the
/// other plane, given signed vertex distances `d` to that plane.
fn cut_interval(t: &Tri, d: &[f64; 3], dir: &Vec3) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut push = |p: Vec3| {
        let s = dir.dot(&p);
        lo = lo.min(s);
        hi = hi.max(s);
    };
    for i in 0..3 {
        let j = (i + 1) % 3;
        if d[i] == 0.0 {
            push(t[i]);
        }
        if d[i] * d[j] < 0.0 {
            let s = d[i] / (d[i] - d[j]);
            push(t[i] + (t[j] - t[i]) * s);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn coplanar_overlap(a: &Tri, b: &Tri, n: &Vec3) -> bool {
    // Drop the dominant normal axis.
    let k = n.iamax();
    let (i, j) = match k {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let pa = a.map(|p| [p[i], p[j]]);
    let pb = b.map(|p| [p[i], p[j]]);
    for e in 0..3 {
        for f in 0..3 {
            if segments_intersect_2d(pa[e], pa[(e + 1) % 3], pb[f], pb[(f + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_triangle_2d(pa[0], &pb) || point_in_triangle_2d(pb[0], &pa)
}

#[inline]
fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = snap(orient2d(q1, q2, p1));
    let d2 = snap(orient2d(q1, q2, p2));
    let d3 = snap(orient2d(p1, p2, q1));
    let d4 = snap(orient2d(p1, p2, q2));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| {
        p[0] >= a[0].min(b[0]) - EPS
            && p[0] <= a[0].max(b[0]) + EPS
            && p[1] >= a[1].min(b[1]) - EPS
            && p[1] <= a[1].max(b[1]) + EPS
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

fn point_in_triangle_2d(p: [f64; 2], t: &[[f64; 2]; 3]) -> bool {
    let s0 = snap(orient2d(t[0], t[1], p));
    let s1 = snap(orient2d(t[1], t[2], p));
    let s2 = snap(orient2d(t[2], t[0], p));
    (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
}

/// Closest points between segments `p1q1` and `p2q2`.
/// After Ericson, "Real-Time Collision Detection" 5.1.9.
pub fn segment_closest_points(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (*p1, *p2);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

/// Minimum distance between two closed triangles with the attaining points
/// (on `a`, on `b`). Zero with a shared point when they intersect.
pub fn distance(a: &Tri, b: &Tri) -> (f64, Vec3, Vec3) {
    let mut best = (f64::INFINITY, a[0], b[0]);
    let mut consider = |pa: Vec3, pb: Vec3| {
        let d = (pa - pb).norm();
        if d < best.0 {
            best = (d, pa, pb);
        }
    };
    for i in 0..3 {
        for j in 0..3 {
            let (pa, pb) = segment_closest_points(&a[i], &a[(i + 1) % 3], &b[j], &b[(j + 1) % 3]);
            consider(pa, pb);
        }
    }
    for p in a {
        consider(*p, closest_point_on_triangle(p, &b[0], &b[1], &b[2]));
    }
    for p in b {
        consider(closest_point_on_triangle(p, &a[0], &a[1], &a[2]), *p);
    }
    if best.0 > 0.0 && intersects(a, b) {
        // Edge-through-interior crossings are not caught by the feature pairs.
        let p = crossing_point(a, b).unwrap_or(best.1);
        return (0.0, p, p);
    }
    best
}

/// A point where an edge of one triangle pierces the other.
fn crossing_point(a: &Tri, b: &Tri) -> Option<Vec3> {
    let pierce = |s: &Tri, t: &Tri| {
        (0..3).find_map(|i| {
            let (p, q) = (s[i], s[(i + 1) % 3]);
            let d = q - p;
            crate::collide::bvh::ray_triangle(&p, &d, &t[0], &t[1], &t[2])
                .filter(|u| (0.0..=1.0).contains(u))
                .map(|u| p + d * u)
        })
    };
    pierce(a, b).or_else(|| pierce(b, a))
}
