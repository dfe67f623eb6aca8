//! Procedural closed meshes. All solids are wound counter-clockwise seen from
//! outside, so [`TriMesh::signed_volume`] is positive.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use super::{TriMesh, Vec3};

/// Axis-aligned box with twelve triangles.
pub fn cuboid(center: Vec3, half: Vec3) -> TriMesh {
    frustum(center, [half.x, half.y], [half.x, half.y], half.z)
}

/// Box whose top face (+Z) has different half extents than its bottom face.
pub fn frustum(center: Vec3, bottom_half: [f64; 2], top_half: [f64; 2], half_height: f64) -> TriMesh {
    let corner = |sx: f64, sy: f64, top: bool| {
        let h = if top { top_half } else { bottom_half };
        let z = if top { half_height } else { -half_height };
        center + Vec3::new(sx * h[0], sy * h[1], z)
    };
    let vertices = vec![
        corner(-1.0, -1.0, false),
        corner(1.0, -1.0, false),
        corner(1.0, 1.0, false),
        corner(-1.0, 1.0, false),
        corner(-1.0, -1.0, true),
        corner(1.0, -1.0, true),
        corner(1.0, 1.0, true),
        corner(-1.0, 1.0, true),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::from_parts_unchecked(vertices, triangles)
}

/// Geodesic sphere: `20·4^subdivisions` triangles.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let vertices = verts.into_iter().map(|v| center + v * radius).collect();
    TriMesh::from_parts_unchecked(vertices, tris)
}

/// Latitude/longitude ellipsoid with `2·n_lon·(n_lat − 1)` triangles.
///
/// `exponent` above 2 squares the cross-section off (superellipsoid in the
/// horizontal plane), which gives a torso-like flattened cylinder.
pub fn ellipsoid(center: Vec3, semi_axes: Vec3, n_lon: u32, n_lat: u32, exponent: f64) -> TriMesh {
    assert!(n_lon >= 3 && n_lat >= 2);
    let shape = |angle: f64| {
        let (s, c) = angle.sin_cos();
        let e = 2.0 / exponent;
        (c.signum() * c.abs().powf(e), s.signum() * s.abs().powf(e))
    };
    let mut vertices = Vec::with_capacity((n_lon * (n_lat - 1) + 2) as usize);
    vertices.push(center + Vec3::new(0.0, 0.0, -semi_axes.z));
    for i in 1..n_lat {
        let polar = PI * i as f64 / n_lat as f64;
        let z = -polar.cos();
        let ring = polar.sin();
        for j in 0..n_lon {
            let (cx, sy) = shape(TAU * j as f64 / n_lon as f64);
            vertices.push(
                center + Vec3::new(semi_axes.x * ring * cx, semi_axes.y * ring * sy, semi_axes.z * z),
            );
        }
    }
    vertices.push(center + Vec3::new(0.0, 0.0, semi_axes.z));
    let top = vertices.len() as u32 - 1;
    let ring = |i: u32, j: u32| 1 + (i - 1) * n_lon + (j % n_lon);
    let mut triangles = Vec::with_capacity((2 * n_lon * (n_lat - 1)) as usize);
    for j in 0..n_lon {
        triangles.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..(n_lat - 1) {
        for j in 0..n_lon {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    for j in 0..n_lon {
        triangles.push([top, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)]);
    }
    TriMesh::from_parts_unchecked(vertices, triangles)
}

/// Closed cylinder along +Z, base centered at `base`.
pub fn cylinder(base: Vec3, radius: f64, height: f64, segments: u32) -> TriMesh {
    assert!(segments >= 3);
    let mut vertices = vec![base, base + Vec3::new(0.0, 0.0, height)];
    for k in 0..2 {
        for j in 0..segments {
            let a = TAU * j as f64 / segments as f64;
            vertices.push(base + Vec3::new(radius * a.cos(), radius * a.sin(), height * k as f64));
        }
    }
    let lo = |j: u32| 2 + (j % segments);
    let hi = |j: u32| 2 + segments + (j % segments);
    let mut triangles = Vec::new();
    for j in 0..segments {
        triangles.push([0, lo(j + 1), lo(j)]);
        triangles.push([1, hi(j), hi(j + 1)]);
        triangles.push([lo(j), lo(j + 1), hi(j + 1)]);
        triangles.push([lo(j), hi(j + 1), hi(j)]);
    }
    TriMesh::from_parts_unchecked(vertices, triangles)
}

/// Flat rectangle in the z = `center.z` plane, facing +Z, split into a
/// `nx × ny` grid of quads.
pub fn rectangle(center: Vec3, half_x: f64, half_y: f64, nx: u32, ny: u32) -> TriMesh {
    let mut vertices = Vec::with_capacity(((nx + 1) * (ny + 1)) as usize);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(
                center
                    + Vec3::new(
                        -half_x + 2.0 * half_x * i as f64 / nx as f64,
                        -half_y + 2.0 * half_y * j as f64 / ny as f64,
                        0.0,
                    ),
            );
        }
    }
    let at = |i: u32, j: u32| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity((2 * nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            triangles.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriMesh::from_parts_unchecked(vertices, triangles)
}
