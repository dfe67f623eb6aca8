use std::collections::HashMap;

use super::mc_table::TRI_TABLE;
use super::ScalarVolume;
use crate::geometry::{TriMesh, Vec3};
use crate::{Error, Result};

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Extracts the `iso` level set. Samples below `iso` count as inside and the
/// triangles face away from them, so a signed distance field that is negative
/// inside yields outward normals.
pub fn marching_cubes(vol: &ScalarVolume, iso: f64) -> Result<TriMesh> {
    let Some((lo, hi)) = vol.range() else {
        return Err(Error::InvalidVolume("volume contains NaN samples".into()));
    };
    if !iso.is_finite() || iso < lo as f64 || iso > hi as f64 {
        return Ok(TriMesh::default());
    }
    let [nx, ny, nz] = vol.dims();
    let cells = (0..nz - 1).flat_map(|k| (0..ny - 1).flat_map(move |j| (0..nx - 1).map(move |i| [i, j, k])));
    let mut grid = Polygonizer::new(vol.dims(), vol.origin(), vol.spacing(), iso);
    for cell in cells {
        grid.cell(cell, |c| vol.get(c) as f64);
    }
    grid.finish()
}

/// Incremental cell-by-cell extraction with vertices shared across cells.
pub(crate) struct Polygonizer {
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    iso: f64,
    ids: HashMap<u64, u32>,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl Polygonizer {
    pub(crate) fn new(dims: [usize; 3], origin: Vec3, spacing: Vec3, iso: f64) -> Self {
        Self {
            dims,
            origin,
            spacing,
            iso,
            ids: HashMap::new(),
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    fn lin(&self, [i, j, k]: [usize; 3]) -> u64 {
        (i + self.dims[0] * (j + self.dims[1] * k)) as u64
    }

    fn position(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin + self.spacing.component_mul(&Vec3::new(i as f64, j as f64, k as f64))
    }

    /// Polygonizes the cell with lowest corner `base`. Cells with a NaN corner
    /// are skipped.
    pub(crate) fn cell(&mut self, base: [usize; 3], value: impl Fn([usize; 3]) -> f64) {
        let corner = |c: usize| [base[0] + CORNERS[c][0], base[1] + CORNERS[c][1], base[2] + CORNERS[c][2]];
        let mut vals = [0.0; 8];
        let mut index = 0usize;
        for (c, v) in vals.iter_mut().enumerate() {
            *v = value(corner(c));
            if v.is_nan() {
                return;
            }
            if *v < self.iso {
                index |= 1 << c;
            }
        }
        let row = &TRI_TABLE[index];
        for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
            let mut ids = [0u32; 3];
            for (slot, &e) in ids.iter_mut().zip(tri) {
                let (a, b) = EDGES[e as usize];
                *slot = self.edge_vertex(corner(a), corner(b), vals[a], vals[b]);
            }
            // The table winds triangles toward the inside corners.
            self.triangles.push([ids[0], ids[2], ids[1]]);
        }
    }

    fn edge_vertex(&mut self, a: [usize; 3], b: [usize; 3], va: f64, vb: f64) -> u32 {
        let t = if vb == va { 0.5 } else { (self.iso - va) / (vb - va) };
        let key = if t <= 0.0 {
            self.lin(a) * 4 + 3
        } else if t >= 1.0 {
            self.lin(b) * 4 + 3
        } else {
            let lo = if self.lin(a) < self.lin(b) { a } else { b };
            let axis = (0..3).find(|&d| a[d] != b[d]).expect("edge endpoints differ");
            self.lin(lo) * 4 + axis as u64
        };
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let (pa, pb) = (self.position(a), self.position(b));
        let p = pa + (pb - pa) * t.clamp(0.0, 1.0);
        let id = self.vertices.len() as u32;
        self.vertices.push(p);
        self.ids.insert(key, id);
        id
    }

    pub(crate) fn finish(self) -> Result<TriMesh> {
        Ok(TriMesh::new(self.vertices, self.triangles)?.compacted())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere_volume(n: usize, r: f64) -> ScalarVolume {
        let spacing = 2.0 * (r + 12.0) / (n - 1) as f64;
        let origin = Vec3::repeat(-(r + 12.0));
        ScalarVolume::from_fn([n; 3], Vec3::repeat(spacing), origin, |p| p.norm() - r).unwrap()
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = marching_cubes(&sphere_volume(64, 50.0), 0.0).unwrap();
        assert_eq!(m.boundary_edge_count(), 0);
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        let area = 4.0 * PI * 50.0 * 50.0;
        assert!((m.area() - area).abs() / area < 0.02, "{} vs {area}", m.area());
        let vol = 4.0 / 3.0 * PI * 50f64.powi(3);
        assert!((m.signed_volume() - vol).abs() / vol < 0.03);
    }

    #[test]
    fn iso_outside_range_is_empty() {
        let v = sphere_volume(16, 20.0);
        assert!(marching_cubes(&v, 1e6).unwrap().is_empty());
        assert!(marching_cubes(&v, -1e6).unwrap().is_empty());
    }

    #[test]
    fn one_inside_corner_gives_one_triangle() {
        let mut s = vec![1.0f32; 8];
        s[0] = -1.0;
        let v = ScalarVolume::new([2, 2, 2], Vec3::repeat(1.0), Vec3::zeros(), s).unwrap();
        let m = marching_cubes(&v, 0.0).unwrap();
        assert_eq!(m.triangle_count(), 1);
        // Faces away from the inside corner at the origin.
        let n = m.triangle_normal(0);
        assert!(n.x > 0.0 && n.y > 0.0 && n.z > 0.0, "{n:?}");
    }

    #[test]
    fn nan_is_rejected() {
        let mut s = vec![1.0f32; 8];
        s[3] = f32::NAN;
        let v = ScalarVolume::new([2, 2, 2], Vec3::repeat(1.0), Vec3::zeros(), s).unwrap();
        assert!(matches!(marching_cubes(&v, 0.0), Err(Error::InvalidVolume(_))));
    }

    #[test]
    fn every_table_case_is_closed_in_a_padded_grid() {
        // Each 2x2x2 corner pattern, padded by an outside shell, gives a
        // closed surface.
        for case in 0u32..256 {
            let n = 4;
            let mut s = vec![1.0f32; n * n * n];
            for c in 0..8 {
                if case & (1 << c) != 0 {
                    let [i, j, k] = CORNERS[c];
                    s[(i + 1) + n * ((j + 1) + n * (k + 1))] = -1.0;
                }
            }
            let v = ScalarVolume::new([n; 3], Vec3::repeat(1.0), Vec3::zeros(), s).unwrap();
            let m = marching_cubes(&v, 0.0).unwrap();
            assert_eq!(m.boundary_edge_count(), 0, "case {case}");
            if case != 0 {
                assert!(m.signed_volume() > 0.0, "case {case}");
            }
        }
    }
}
