//! Shared linear algebra, point clouds and triangle meshes.

mod kdtree;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use kdtree::KdTree;

/// A point or direction in millimeters.
pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Triangles with less area than this (mm²) are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// A proper rigid motion `p' = R·p + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().all(|v| v.is_finite()) || !is_finite(&translation) {
            return Err(Error::InvalidGeometry("non-finite transform".into()));
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ORTHONORMAL_TOL {
            return Err(Error::InvalidGeometry(format!(
                "rotation is not orthonormal (error {ortho_err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidGeometry(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about `axis` (normalized here) through the origin.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        Self {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    pub fn rotation_x_deg(deg: f64) -> Self {
        Self::from_axis_angle(Vec3::x(), deg.to_radians())
    }

    pub fn rotation_y_deg(deg: f64) -> Self {
        Self::from_axis_angle(Vec3::y(), deg.to_radians())
    }

    pub fn rotation_z_deg(deg: f64) -> Self {
        Self::from_axis_angle(Vec3::z(), deg.to_radians())
    }

    /// Row-major rotation plus translation, as stored in rig and machine files.
    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self> {
        Self::new(
            Matrix3::from_row_slice(&rotation),
            Vec3::from_column_slice(&translation),
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Rotation as a unit axis and an angle in radians; identity gives
    /// (+Z, 0).
    pub fn axis_angle(&self) -> (Vec3, f64) {
        nalgebra::Rotation3::from_matrix_unchecked(self.rotation)
            .axis_angle()
            .map_or((Vec3::z(), 0.0), |(axis, angle)| (axis.into_inner(), angle))
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    rotation: [f64; 9],
    translation_mm: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RigidTransformRepr {
            rotation: self.rotation_row_major(),
            translation_mm: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RigidTransformRepr::deserialize(deserializer)?;
        RigidTransform::from_row_major(repr.rotation, repr.translation_mm)
            .map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn is_finite(v: &Vec3) -> bool {
    v.x.is_finite() && v.y.is_finite() && v.z.is_finite()
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    #[inline]
    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    #[inline]
    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    #[inline]
    pub fn overlaps(&self, other: &Aabb, margin: f64) -> bool {
        (0..3).all(|i| {
            self.min[i] <= other.max[i] + margin && other.min[i] <= self.max[i] + margin
        })
    }

    /// Squared distance between the closest points of two boxes (0 if overlapping).
    #[inline]
    pub fn distance_squared(&self, other: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let gap = (other.min[i] - self.max[i]).max(self.min[i] - other.max[i]);
            if gap > 0.0 {
                d2 += gap * gap;
            }
        }
        d2
    }

    #[inline]
    pub fn distance_squared_to_point(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let gap = (self.min[i] - p[i]).max(p[i] - self.max[i]);
            if gap > 0.0 {
                d2 += gap * gap;
            }
        }
        d2
    }
}

/// Points with optional unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidGeometry(format!("point {i} is not finite")));
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    /// Normals are renormalized; zero-length or non-finite normals are rejected.
    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let mut cloud = Self::new(points)?;
        let mut unit = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let len = n.norm();
            if !len.is_finite() || len < 1e-12 {
                return Err(Error::InvalidGeometry(format!("normal {i} has no direction")));
            }
            unit.push(n / len);
        }
        cloud.normals = Some(unit);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Vec3>>) {
        (self.points, self.normals)
    }

    /// Keeps the points for which `keep` returns true.
    pub fn retain(&self, mut keep: impl FnMut(&Vec3) -> bool) -> PointCloud {
        let mask: Vec<bool> = self.points.iter().map(&mut keep).collect();
        let points = self
            .points
            .iter()
            .zip(&mask)
            .filter(|(_, k)| **k)
            .map(|(p, _)| *p)
            .collect();
        let normals = self.normals.as_ref().map(|ns| {
            ns.iter()
                .zip(&mask)
                .filter(|(_, k)| **k)
                .map(|(n, _)| *n)
                .collect()
        });
        PointCloud { points, normals }
    }

    /// Concatenates clouds. Normals survive only if every input has them.
    pub fn concat<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> PointCloud {
        let clouds: Vec<&PointCloud> = clouds.into_iter().collect();
        let all_normals = !clouds.is_empty() && clouds.iter().all(|c| c.normals.is_some());
        let mut points = Vec::with_capacity(clouds.iter().map(|c| c.len()).sum());
        let mut normals = all_normals.then(Vec::new);
        for c in clouds {
            points.extend_from_slice(&c.points);
            if let (Some(out), Some(ns)) = (normals.as_mut(), c.normals.as_ref()) {
                out.extend_from_slice(ns);
            }
        }
        PointCloud { points, normals }
    }
}

/// Indexed triangle mesh. Construction drops degenerate triangles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidGeometry(format!("vertex {i} is not finite")));
        }
        if vertices.len() > u32::MAX as usize {
            return Err(Error::InvalidGeometry("too many vertices".into()));
        }
        let n = vertices.len() as u32;
        for (i, t) in triangles.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {i} references vertex {bad}, mesh has {n}"
                )));
            }
        }
        let triangles = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices, t) >= DEGENERATE_AREA)
            .collect();
        Ok(Self {
            vertices,
            triangles,
        })
    }

    /// Skips validation. Callers guarantee indices are in range, vertices
    /// finite and triangles non-degenerate.
    pub(crate) fn from_parts_unchecked(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        debug_assert!(triangles
            .iter()
            .all(|t| t.iter().all(|&v| (v as usize) < vertices.len())));
        Self {
            vertices,
            triangles,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<[u32; 3]>) {
        (self.vertices, self.triangles)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|p| t.apply_point(p)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Uniform scale about `center`. Used for fixture construction.
    pub fn scaled_about(&self, center: &Vec3, s: f64) -> Result<TriMesh> {
        TriMesh::new(
            self.vertices.iter().map(|p| center + (p - center) * s).collect(),
            self.triangles.clone(),
        )
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(&self.vertices, t))
            .sum()
    }

    /// Signed enclosed volume; positive for outward-wound closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::zeros();
        }
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    pub fn triangle_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Undirected edge → number of incident triangles.
    pub fn edge_use_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edge_use_counts().values().filter(|&&c| c == 1).count()
    }

    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.edge_use_counts().values().all(|&c| c == 2)
    }

    /// V − E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_use_counts().len() as i64;
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - edges + self.triangles.len() as i64
    }

    /// Drops vertices no triangle references and re-indexes.
    pub fn compacted(&self) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                t.map(|v| {
                    let slot = &mut remap[v as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[v as usize]);
                    }
                    *slot
                })
            })
            .collect();
        TriMesh {
            vertices,
            triangles,
        }
    }

    /// Concatenates meshes into one vertex/index space.
    pub fn merged<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> TriMesh {
        let mut out = TriMesh::default();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles
                .extend(m.triangles.iter().map(|t| t.map(|v| v + base)));
        }
        out
    }
}

#[inline]
fn triangle_area(vertices: &[Vec3], t: &[u32; 3]) -> f64 {
    let a = vertices[t[0] as usize];
    let b = vertices[t[1] as usize];
    let c = vertices[t[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Applies `t` to every point and rotates normals.
pub fn transform_points(t: &RigidTransform, pc: &PointCloud) -> PointCloud {
    PointCloud {
        points: pc.points.iter().map(|p| t.apply_point(p)).collect(),
        normals: pc
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect()),
    }
}

pub fn mesh_bounds(m: &TriMesh) -> Result<Aabb> {
    if m.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(Aabb::from_points(&m.vertices))
}

/// Closest point on the closed triangle `abc` to `p`.
///
/// Region classification after Ericson, "Real-Time Collision Detection" 5.1.5.
/// Degenerate triangles fall through to a valid point on their hull.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Euclidean distance from `p` to the closed triangle.
pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> Result<f64> {
    let [a, b, c] = tri;
    let area2 = (b - a).cross(&(c - a)).norm();
    if area2 < 2.0 * DEGENERATE_AREA {
        return Err(Error::InvalidGeometry("degenerate triangle".into()));
    }
    Ok((p - closest_point_on_triangle(p, a, b, c)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b): (f64, f64) = ($a, $b);
            assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
        }};
    }

    fn unit_right_triangle() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::x(), Vec3::y()]
    }

    #[test]
    fn identity_leaves_cloud_unchanged() {
        let pc = PointCloud::with_normals(
            vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.0, 0.5, 9.0)],
            vec![Vec3::z(), Vec3::x()],
        )
        .unwrap();
        assert_eq!(transform_points(&RigidTransform::identity(), &pc), pc);
    }

    #[test]
    fn translation_moves_origin() {
        let pc = PointCloud::new(vec![Vec3::zeros()]).unwrap();
        let t = RigidTransform::from_translation(Vec3::new(10.0, 0.0, 0.0));
        assert_eq!(transform_points(&t, &pc).points()[0], Vec3::new(10.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let pc = PointCloud::with_normals(vec![Vec3::x()], vec![Vec3::x()]).unwrap();
        let out = transform_points(&RigidTransform::rotation_z_deg(90.0), &pc);
        assert!((out.points()[0] - Vec3::y()).norm() < 1e-9);
        assert!((out.normals().unwrap()[0] - Vec3::y()).norm() < 1e-9);
    }

    #[test]
    fn rejects_reflection_and_shear() {
        let reflect = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(reflect, Vec3::zeros()).is_err());
        let mut shear = Matrix3::identity();
        shear[(0, 1)] = 1e-6;
        assert!(RigidTransform::new(shear, Vec3::zeros()).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let t = RigidTransform::rotation_y_deg(30.0)
            .compose(&RigidTransform::from_translation(Vec3::new(1.0, 2.0, 3.0)));
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("translation_mm"));
        let back: RigidTransform = serde_json::from_str(&json).unwrap();
        assert!((back.rotation() - t.rotation()).abs().max() < 1e-15);
    }

    #[test]
    fn distance_inside_and_above() {
        let tri = unit_right_triangle();
        assert_close!(point_triangle_distance(&Vec3::new(0.2, 0.2, 0.0), &tri).unwrap(), 0.0, 1e-15);
        assert_close!(point_triangle_distance(&Vec3::new(0.0, 0.0, 1.0), &tri).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn distance_beyond_vertex_matches_sampling() {
        let tri = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let p = Vec3::new(3.0, -1.0, 0.5);
        // brute force: dense barycentric sampling of the closed triangle
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let q = tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v;
                best = best.min((p - q).norm());
            }
        }
        let d = point_triangle_distance(&p, &tri).unwrap();
        assert_close!(d, (p - tri[1]).norm(), 1e-12);
        assert!(best >= d - 1e-12 && best - d < 1e-2);
    }

    #[test]
    fn degenerate_triangle_distance_is_error() {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(point_triangle_distance(&Vec3::z(), &tri).is_err());
    }

    #[test]
    fn bounds_examples() {
        let cube = shapes::cuboid(Vec3::new(0.5, 0.5, 0.5), Vec3::repeat(0.5));
        let b = mesh_bounds(&cube).unwrap();
        assert_eq!(b.min, Vec3::zeros());
        assert_eq!(b.max, Vec3::repeat(1.0));

        let tri = TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::new(0.0, 2.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(mesh_bounds(&tri).unwrap().max, Vec3::new(1.0, 2.0, 0.0));
        assert!(matches!(mesh_bounds(&TriMesh::default()), Err(Error::EmptyMesh)));
    }

    #[test]
    fn translated_bounds_follow_translation() {
        let m = shapes::icosphere(Vec3::new(3.0, -2.0, 1.0), 5.0, 2);
        let shift = Vec3::new(10.0, 20.0, -5.0);
        let moved = m.transformed(&RigidTransform::from_translation(shift));
        let (b0, b1) = (mesh_bounds(&m).unwrap(), mesh_bounds(&moved).unwrap());
        assert!((b1.min - (b0.min + shift)).norm() < 1e-12);
        assert!((b1.max - (b0.max + shift)).norm() < 1e-12);
    }

    #[test]
    fn construction_drops_degenerates_and_rejects_bad_indices() {
        let verts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::x() * 2.0];
        let m = TriMesh::new(verts.clone(), vec![[0, 1, 2], [0, 1, 3], [1, 1, 2]]).unwrap();
        assert_eq!(m.triangle_count(), 1);
        let err = TriMesh::new(verts, vec![[0, 1, 7]]).unwrap_err();
        assert!(err.to_string().contains("vertex 7"));
    }

    #[test]
    fn icosphere_topology() {
        let s = shapes::icosphere(Vec3::zeros(), 1.0, 3);
        assert!(s.is_watertight());
        assert_eq!(s.euler_characteristic(), 2);
        assert!(s.signed_volume() > 0.0);
    }
}
