//! Surface reconstruction from oriented points.
//!
//! Every grid corner within the truncation distance of the cloud gets the
//! signed distance to a locally fitted plane: the Gaussian-weighted centroid
//! of the nearby points with their weighted mean normal. Corners farther out
//! stay undefined and marching cubes skips any cell that touches one, so the
//! surface closes small gaps but not large ones.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Polygonizer;

use crate::geometry::{KdTree, PointCloud, TriMesh, Vec3};
use crate::{Error, Result};

pub const MIN_POINTS: usize = 100;
/// Corner budget for the occupancy grid; beyond this the grid is too fine
/// for the cloud's extent.
const MAX_GRID_CORNERS: usize = 1 << 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconParams {
    /// Voxels along the longest axis of the cloud's bounds.
    pub grid_resolution: usize,
    /// Neighbors used for normal estimation when the cloud has none.
    pub normal_neighborhood: usize,
    /// Largest distance from the data at which the field is defined, mm.
    /// Defaults to three voxels.
    pub truncation_mm: Option<f64>,
    /// Radius of the plane fit, mm. Defaults to the truncation distance.
    pub smoothing_mm: Option<f64>,
    /// Camera origins. Estimated normals are oriented toward the nearest one.
    pub viewpoints: Vec<Vec3>,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            grid_resolution: 512,
            normal_neighborhood: 16,
            truncation_mm: None,
            smoothing_mm: None,
            viewpoints: Vec::new(),
        }
    }
}

impl ReconParams {
    pub fn with_grid(grid_resolution: usize) -> Self {
        Self {
            grid_resolution,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(16..=1024).contains(&self.grid_resolution) {
            return Err(Error::Reconstruction(format!(
                "grid resolution {} outside [16, 1024]",
                self.grid_resolution
            )));
        }
        if self.normal_neighborhood < 3 {
            return Err(Error::Reconstruction("normal neighborhood needs at least 3 points".into()));
        }
        for (name, v) in [("truncation", self.truncation_mm), ("smoothing", self.smoothing_mm)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Reconstruction(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Grid placement chosen for a cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconGrid {
    pub origin: Vec3,
    pub voxel_mm: f64,
    pub dims: [usize; 3],
    pub truncation_mm: f64,
    pub smoothing_mm: f64,
}

impl ReconGrid {
    pub fn for_cloud(cloud: &PointCloud, params: &ReconParams) -> Result<ReconGrid> {
        let b = cloud.bounds();
        let extent = b.extent();
        let longest = extent.max();
        if !(longest > 0.0) {
            return Err(Error::Reconstruction("cloud has no extent".into()));
        }
        let voxel = longest / params.grid_resolution as f64;
        let truncation = params.truncation_mm.unwrap_or(3.0 * voxel);
        let smoothing = params.smoothing_mm.unwrap_or(truncation);
        let pad = truncation + voxel;
        let origin = b.min - Vec3::repeat(pad);
        let dims = [0, 1, 2].map(|a| ((extent[a] + 2.0 * pad) / voxel).ceil() as usize + 1);
        let corners = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if corners.map_or(true, |c| c > MAX_GRID_CORNERS) {
            return Err(Error::Reconstruction(format!("grid {dims:?} is too large")));
        }
        Ok(ReconGrid {
            origin,
            voxel_mm: voxel,
            dims,
            truncation_mm: truncation,
            smoothing_mm: smoothing,
        })
    }

    fn position(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel_mm
    }

    fn lin(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    fn unlin(&self, l: usize) -> [usize; 3] {
        let (nx, ny) = (self.dims[0], self.dims[1]);
        [l % nx, (l / nx) % ny, l / (nx * ny)]
    }
}

pub fn reconstruct(cloud: &PointCloud, params: &ReconParams) -> Result<TriMesh> {
    params.validate()?;
    let cloud = dedup(cloud);
    if cloud.len() < MIN_POINTS {
        return Err(Error::Reconstruction(format!(
            "{} distinct points, need at least {MIN_POINTS}",
            cloud.len()
        )));
    }
    let grid = ReconGrid::for_cloud(&cloud, params)?;
    let tree = KdTree::new(cloud.points());
    let normals = match cloud.normals() {
        Some(n) => n.to_vec(),
        None => estimate_normals(cloud.points(), &tree, params.normal_neighborhood, &params.viewpoints)?,
    };
    let points = cloud.points();

    let band = band_corners(points, &grid);
    let radius = grid.smoothing_mm.max(grid.truncation_mm);
    let sigma2 = (grid.smoothing_mm / 2.0).powi(2);
    let trunc2 = grid.truncation_mm * grid.truncation_mm;
    let values: Vec<f32> = band
        .par_iter()
        .map_init(Vec::new, |near, &l| {
            let x = grid.position(grid.unlin(l));
            tree.within_radius(&x, radius, near);
            let mut closest = f64::INFINITY;
            let mut wsum = 0.0;
            let mut c = Vec3::zeros();
            let mut n = Vec3::zeros();
            for &i in near.iter() {
                let d2 = (points[i] - x).norm_squared();
                closest = closest.min(d2);
                let w = (-d2 / (2.0 * sigma2)).exp();
                wsum += w;
                c += points[i] * w;
                n += normals[i] * w;
            }
            if closest > trunc2 || wsum <= 0.0 {
                return f32::NAN;
            }
            match n.try_normalize(1e-12) {
                Some(n) => n.dot(&(x - c / wsum)) as f32,
                None => f32::NAN,
            }
        })
        .collect();
    let field: HashMap<usize, f32> = band.iter().copied().zip(values).filter(|(_, v)| !v.is_nan()).collect();

    let mut poly = Polygonizer::new(grid.dims, grid.origin, Vec3::repeat(grid.voxel_mm), 0.0);
    for &l in &band {
        let base = grid.unlin(l);
        if (0..3).any(|a| base[a] + 1 >= grid.dims[a]) || !field.contains_key(&l) {
            continue;
        }
        poly.cell(base, |c| field.get(&grid.lin(c)).map_or(f64::NAN, |&v| v as f64));
    }
    let mesh = poly.finish()?;
    if mesh.is_empty() {
        return Err(Error::Reconstruction("no surface crossed the grid".into()));
    }
    Ok(mesh)
}

/// Drops bit-identical repeats, keeping the first occurrence.
fn dedup(cloud: &PointCloud) -> PointCloud {
    let key = |p: &Vec3| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
    let mut seen = std::collections::HashSet::with_capacity(cloud.len());
    let mask: Vec<bool> = cloud.points().iter().map(|p| seen.insert(key(p))).collect();
    if mask.iter().all(|&k| k) {
        return cloud.clone();
    }
    let mut i = 0;
    cloud.retain(|_| {
        i += 1;
        mask[i - 1]
    })
}

/// Sorted linear indices of every corner inside the axis-aligned box of
/// half-width `truncation` around some point.
fn band_corners(points: &[Vec3], grid: &ReconGrid) -> Vec<usize> {
    let total = grid.dims.iter().product::<usize>();
    let mut flags = vec![0u64; total.div_ceil(64)];
    let reach = grid.truncation_mm / grid.voxel_mm;
    for p in points {
        let g = (p - grid.origin) / grid.voxel_mm;
        let lo = [0, 1, 2].map(|a| (g[a] - reach).ceil().max(0.0) as usize);
        let hi = [0, 1, 2].map(|a| ((g[a] + reach).floor() as usize).min(grid.dims[a] - 1));
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                let row = grid.lin([0, j, k]);
                for i in lo[0]..=hi[0] {
                    let l = row + i;
                    flags[l / 64] |= 1 << (l % 64);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (w, &bits) in flags.iter().enumerate() {
        let mut b = bits;
        while b != 0 {
            let t = b.trailing_zeros() as usize;
            out.push(w * 64 + t);
            b &= b - 1;
        }
    }
    out
}

/// PCA normals over `k` nearest neighbors, made consistent by growing a
/// minimum spanning tree over the neighbor graph (weight 1 − |nᵢ·nⱼ|).
/// Each connected part is seeded at the point closest to a viewpoint and
/// faces it; without viewpoints the seed faces away from the centroid.
pub fn estimate_normals(points: &[Vec3], tree: &KdTree, k: usize, viewpoints: &[Vec3]) -> Result<Vec<Vec3>> {
    let k = k.min(points.len());
    let fits: Vec<(Vec3, Vec<usize>)> = points
        .par_iter()
        .map(|p| {
            let nn: Vec<usize> = tree.k_nearest(p, k).into_iter().map(|(i, _)| i).collect();
            let c = nn.iter().map(|&i| points[i]).sum::<Vec3>() / nn.len() as f64;
            let mut cov = Matrix3::zeros();
            for &i in &nn {
                let d = points[i] - c;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let (lo, mid, hi) = (
                eig.eigenvalues[order[0]],
                eig.eigenvalues[order[1]],
                eig.eigenvalues[order[2]],
            );
            let normal = if hi > 0.0 && mid > 1e-10 * hi && lo.is_finite() {
                eig.eigenvectors.column(order[0]).into_owned()
            } else {
                Vec3::zeros()
            };
            (normal, nn)
        })
        .collect();
    if let Some(i) = fits.iter().position(|(n, _)| n.norm() < 0.5) {
        return Err(Error::Reconstruction(format!(
            "normal at point {i} is undefined: its neighborhood is degenerate"
        )));
    }
    let mut normals: Vec<Vec3> = fits.iter().map(|(n, _)| *n).collect();

    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let facing = |i: usize| -> (f64, Vec3) {
        match viewpoints
            .iter()
            .map(|v| ((v - points[i]).norm_squared(), *v))
            .min_by(|a, b| a.0.total_cmp(&b.0))
        {
            Some((d2, v)) => (d2, v - points[i]),
            None => (-(points[i] - centroid).norm_squared(), points[i] - centroid),
        }
    };
    let mut seeds: Vec<usize> = (0..points.len()).collect();
    seeds.sort_by(|&a, &b| facing(a).0.total_cmp(&facing(b).0).then(a.cmp(&b)));

    let mut done = vec![false; points.len()];
    let mut heap = BinaryHeap::new();
    for seed in seeds {
        if done[seed] {
            continue;
        }
        if normals[seed].dot(&facing(seed).1) < 0.0 {
            normals[seed] = -normals[seed];
        }
        done[seed] = true;
        let push = |heap: &mut BinaryHeap<_>, from: usize, normals: &[Vec3], done: &[bool]| {
            for &j in &fits[from].1 {
                if !done[j] {
                    let cost = (1.0 - normals[from].dot(&normals[j]).abs()).max(0.0);
                    heap.push(Reverse((cost.to_bits(), j, from)));
                }
            }
        };
        push(&mut heap, seed, &normals, &done);
        while let Some(Reverse((_, j, from))) = heap.pop() {
            if done[j] {
                continue;
            }
            if normals[j].dot(&normals[from]) < 0.0 {
                normals[j] = -normals[j];
            }
            done[j] = true;
            push(&mut heap, j, &normals, &done);
        }
    }
    Ok(normals)
}
