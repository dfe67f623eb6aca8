//! Per-vertex distance from a mesh to the cloud it was built from, and the
//! filter that drops vertices too far from any measurement.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evalkit::{metrics, MetricsReport};
use crate::geometry::{KdTree, PointCloud, TriMesh};
use crate::{ply, Error, Result};

pub const DEFAULT_THRESHOLDS_MM: [f64; 3] = [1.0, 3.0, 5.0];
pub const DEFAULT_FILTER_K: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityBin {
    Blue,
    Green,
    Red,
    Over,
}

impl QualityBin {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            QualityBin::Blue => [0, 0, 255],
            QualityBin::Green => [0, 255, 0],
            QualityBin::Red => [255, 0, 0],
            QualityBin::Over => [64, 64, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMap {
    pub quality: Vec<f64>,
    pub summary: MetricsReport,
    pub thresholds_mm: [f64; 3],
}

impl QualityMap {
    /// Distance from every vertex of `mesh` to its nearest point in
    /// `reference`.
    pub fn compute(mesh: &TriMesh, reference: &PointCloud) -> Result<QualityMap> {
        if reference.is_empty() {
            return Err(Error::EmptyInput("quality reference cloud is empty"));
        }
        if mesh.vertex_count() == 0 {
            return Err(Error::EmptyMesh);
        }
        let tree = KdTree::new(reference.points());
        let quality: Vec<f64> = mesh
            .vertices()
            .par_iter()
            .map(|v| tree.nearest(v).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
            .collect();
        Self::from_values(quality)
    }

    pub fn from_values(quality: Vec<f64>) -> Result<QualityMap> {
        let summary = metrics(&quality)?;
        Ok(QualityMap {
            quality,
            summary,
            thresholds_mm: DEFAULT_THRESHOLDS_MM,
        })
    }

    pub fn bin(&self, q: f64) -> QualityBin {
        let [a, b, c] = self.thresholds_mm;
        if q < a {
            QualityBin::Blue
        } else if q < b {
            QualityBin::Green
        } else if q < c {
            QualityBin::Red
        } else {
            QualityBin::Over
        }
    }

    /// Vertex counts per bin: blue, green, red, over.
    pub fn bin_counts(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for &q in &self.quality {
            out[self.bin(q) as usize] += 1;
        }
        out
    }

    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.quality.iter().map(|&q| self.bin(q).rgb()).collect()
    }

    /// Writes `mesh` with per-vertex `quality` and bin colors.
    pub fn write_ply<W: Write>(&self, w: W, mesh: &TriMesh, encoding: ply::Encoding) -> Result<()> {
        ply::write_quality_mesh(w, mesh, &self.quality, &self.colors(), encoding)
    }
}

/// Output of [`filter_by_quality`].
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub mesh: TriMesh,
    pub cutoff_mm: f64,
    /// For each output vertex, its index in the input mesh.
    pub source_vertex: Vec<usize>,
}

/// Drops vertices whose quality exceeds `k` times the map's RMSE, together
/// with their faces.
pub fn filter_by_quality(mesh: &TriMesh, qmap: &QualityMap, k: f64) -> Result<Filtered> {
    filter_by_cutoff(mesh, &qmap.quality, k * qmap.summary.rmse_mm)
}

pub fn filter_by_cutoff(mesh: &TriMesh, quality: &[f64], cutoff_mm: f64) -> Result<Filtered> {
    if quality.len() != mesh.vertex_count() {
        return Err(Error::InvalidGeometry(format!(
            "{} quality values for {} vertices",
            quality.len(),
            mesh.vertex_count()
        )));
    }
    let keep: Vec<bool> = quality.iter().map(|&q| q <= cutoff_mm).collect();
    let tris: Vec<[u32; 3]> = mesh
        .triangles()
        .iter()
        .filter(|t| t.iter().all(|&v| keep[v as usize]))
        .copied()
        .collect();
    if tris.is_empty() {
        return Err(Error::FilteredEverything { cutoff_mm });
    }
    let mut used = vec![false; mesh.vertex_count()];
    for t in &tris {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let mut remap = vec![u32::MAX; mesh.vertex_count()];
    let mut source_vertex = Vec::new();
    for (v, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        remap[v] = source_vertex.len() as u32;
        source_vertex.push(v);
    }
    let vertices = source_vertex.iter().map(|&v| mesh.vertices()[v]).collect();
    let tris = tris.into_iter().map(|t| t.map(|v| remap[v as usize])).collect();
    Ok(Filtered {
        mesh: TriMesh::from_parts_unchecked(vertices, tris),
        cutoff_mm,
        source_vertex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shapes, Vec3};

    #[test]
    fn bins_follow_thresholds() {
        let q = QualityMap::from_values(vec![0.5, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(q.bin_counts(), [1, 1, 1, 1]);
        assert_eq!(q.colors()[0], [0, 0, 255]);
    }

    #[test]
    fn vertices_from_reference_score_zero() {
        let m = shapes::icosphere(Vec3::zeros(), 10.0, 2);
        let cloud = PointCloud::new(m.vertices().to_vec()).unwrap();
        let q = QualityMap::compute(&m, &cloud).unwrap();
        assert!(q.quality.iter().all(|&d| d == 0.0));
        assert!(QualityMap::compute(&m, &PointCloud::default()).is_err());
    }

    #[test]
    fn cutoff_is_k_times_rmse() {
        let m = shapes::rectangle(Vec3::zeros(), 1.0, 1.0, 2, 2);
        let values = vec![1.0; m.vertex_count()];
        let q = QualityMap::from_values(values).unwrap();
        let f = filter_by_quality(&m, &q, 3.0).unwrap();
        assert_eq!(f.cutoff_mm, 3.0);
        // Equal qualities: nothing goes.
        assert_eq!(f.mesh, m);
    }

    #[test]
    fn far_vertex_and_its_faces_are_removed() {
        let m = shapes::rectangle(Vec3::zeros(), 1.0, 1.0, 2, 2);
        let center = m.vertices().iter().position(|v| v.norm() < 1e-12).unwrap();
        let mut values = vec![0.1; m.vertex_count()];
        values[center] = 10.0;
        let f = filter_by_cutoff(&m, &values, 1.0).unwrap();
        assert!(f.mesh.vertex_count() < m.vertex_count());
        assert!(!f.source_vertex.contains(&center));
        for (i, &s) in f.source_vertex.iter().enumerate() {
            assert_eq!(f.mesh.vertices()[i], m.vertices()[s]);
        }
        assert!(f.mesh.triangle_count() < m.triangle_count());
        assert!(matches!(
            filter_by_cutoff(&m, &values, 0.01),
            Err(Error::FilteredEverything { .. })
        ));
    }

    #[test]
    fn quality_ply_has_color_columns() {
        let m = shapes::icosphere(Vec3::zeros(), 10.0, 1);
        let q = QualityMap::from_values(vec![2.0; m.vertex_count()]).unwrap();
        let mut buf = Vec::new();
        q.write_ply(&mut buf, &m, ply::Encoding::Ascii).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("property float quality"));
        assert!(text.contains("property uchar green"));
        let back = ply::parse(text.as_bytes()).unwrap();
        assert_eq!(back.quality.unwrap()[0], 2.0);
    }
}
