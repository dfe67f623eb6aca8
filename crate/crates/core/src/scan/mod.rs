//! Synthetic depth-camera rig.
//!
//! Camera frames follow the pinhole convention: +X right, +Y down the image,
//! +Z along the optical axis. Depth is the camera-frame Z of the hit, not the
//! ray length.

mod calibrate;
mod format;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collide::Bvh;
use crate::geometry::{transform_points, PointCloud, RigidTransform, TriMesh, Vec3};
use crate::{Error, Result};

pub use calibrate::{calibrate_pose, Calibration};
pub use format::{read_frame, read_rig, write_frame, write_rig, DPF_MAGIC};

pub const MKV2_WIDTH: u32 = 512;
pub const MKV2_HEIGHT: u32 = 424;
pub const MKV2_HFOV_DEG: f64 = 70.0;
pub const MKV2_VFOV_DEG: f64 = 60.0;

/// Neighbor spacing, in pixels, used for depth-grid normals.
pub const DEFAULT_NORMAL_STEP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let ok = width > 0
            && height > 0
            && fx.is_finite()
            && fy.is_finite()
            && fx > 0.0
            && fy > 0.0
            && (0.0..width as f64).contains(&cx)
            && (0.0..height as f64).contains(&cy);
        if !ok {
            return Err(Error::InvalidGeometry(format!(
                "bad intrinsics {width}x{height} f=({fx}, {fy}) c=({cx}, {cy})"
            )));
        }
        Ok(Self { width, height, fx, fy, cx, cy })
    }

    /// Focal lengths from the full field of view; principal point at the
    /// image center with pixel centers on integer coordinates.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64, vfov_deg: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0 && vfov_deg > 0.0 && vfov_deg < 180.0) {
            return Err(Error::InvalidGeometry(format!("bad field of view {hfov_deg}x{vfov_deg}")));
        }
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        let fy = (height as f64 / 2.0) / (vfov_deg.to_radians() / 2.0).tan();
        Self::new(
            width,
            height,
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn mkv2() -> Self {
        Self::from_fov(MKV2_WIDTH, MKV2_HEIGHT, MKV2_HFOV_DEG, MKV2_VFOV_DEG)
            .expect("constant intrinsics are valid")
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame direction through pixel `(u, v)`, scaled so that z = 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn unproject_pixel(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.ray(u, v) * depth
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// Row-major depth image in millimeters, top row first; 0 means no return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    intrinsics: CameraIntrinsics,
    depths: Vec<u16>,
}

impl DepthFrame {
    pub fn new(intrinsics: CameraIntrinsics, depths: Vec<u16>) -> Result<Self> {
        if depths.len() != intrinsics.pixel_count() {
            return Err(Error::InvalidGeometry(format!(
                "{} depth samples for a {}x{} frame",
                depths.len(),
                intrinsics.width,
                intrinsics.height
            )));
        }
        Ok(Self { intrinsics, depths })
    }

    pub fn empty(intrinsics: CameraIntrinsics) -> Self {
        Self {
            intrinsics,
            depths: vec![0; intrinsics.pixel_count()],
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn depths(&self) -> &[u16] {
        &self.depths
    }

    pub fn depth(&self, u: usize, v: usize) -> u16 {
        self.depths[v * self.intrinsics.width as usize + u]
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|&&d| d != 0).count()
    }
}

/// Camera placement: `pose` maps camera coordinates to world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub camera_id: String,
    #[serde(flatten)]
    pub pose: RigidTransform,
}

impl CameraPose {
    pub fn new(camera_id: impl Into<String>, pose: RigidTransform) -> Self {
        Self {
            camera_id: camera_id.into(),
            pose,
        }
    }

    /// Camera at `eye` looking at `target`, with `up` pointing toward the top
    /// of the image.
    pub fn look_at(camera_id: impl Into<String>, eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let z = (target - eye).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidGeometry("camera target coincides with its position".into())
        })?;
        let x = z.cross(&up).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidGeometry("camera up vector is parallel to the view direction".into())
        })?;
        let y = z.cross(&x);
        let rotation = nalgebra::Matrix3::from_columns(&[x, y, z]);
        Ok(Self::new(camera_id, RigidTransform::new(rotation, eye)?))
    }

    pub fn origin(&self) -> Vec3 {
        *self.pose.translation()
    }
}

/// Depth noise: σ = (sigma_base + sigma_per_meter · depth_m) · edge factor,
/// where the edge factor grows linearly from 1 at the principal point to
/// `edge_falloff` at the image corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_base: f64,
    pub sigma_per_meter: f64,
    pub edge_falloff: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_base: 1.0,
            sigma_per_meter: 1.5,
            edge_falloff: 1.5,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            sigma_base: 0.0,
            sigma_per_meter: 0.0,
            edge_falloff: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.sigma_base, self.sigma_per_meter, self.edge_falloff];
        if fields.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!("noise parameters must be non-negative: {self:?}")))
        }
    }

    /// Every field multiplied by `k`, except the edge falloff.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_base: self.sigma_base * k,
            sigma_per_meter: self.sigma_per_meter * k,
            edge_falloff: self.edge_falloff,
        }
    }

    pub fn sigma(&self, intr: &CameraIntrinsics, u: f64, v: f64, depth_mm: f64) -> f64 {
        let corner = intr.cx.hypot(intr.cy);
        let r = if corner > 0.0 {
            ((u - intr.cx).hypot(v - intr.cy) / corner).min(1.0)
        } else {
            0.0
        };
        let edge = 1.0 + (self.edge_falloff - 1.0) * r;
        (self.sigma_base + self.sigma_per_meter * depth_mm / 1000.0) * edge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSliceParams {
    pub z_cut: f64,
    #[serde(default = "yes")]
    pub keep_above: bool,
}

fn yes() -> bool {
    true
}

impl TableSliceParams {
    pub fn above(z_cut: f64) -> Self {
        Self { z_cut, keep_above: true }
    }

    pub fn keeps(&self, p: &Vec3) -> bool {
        if self.keep_above {
            p.z >= self.z_cut
        } else {
            p.z < self.z_cut
        }
    }
}

/// Ray casts `scene` through every pixel. Each image row draws its noise from
/// its own ChaCha stream, so output depends only on `seed`.
pub fn render_depth(
    scene: &TriMesh,
    bvh: &Bvh,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    seed: u64,
) -> Result<DepthFrame> {
    noise.validate()?;
    if scene.is_empty() {
        return Ok(DepthFrame::empty(*intr));
    }
    let w = intr.width as usize;
    let origin = pose.origin();
    let rot = pose.pose.rotation();
    let mut depths = vec![0u16; intr.pixel_count()];
    depths.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(v as u64);
        for (u, out) in row.iter_mut().enumerate() {
            let (uf, vf) = (u as f64, v as f64);
            let dir = rot * intr.ray(uf, vf);
            let Some(hit) = bvh.ray_hit(scene, &origin, &dir, 0.0, f64::INFINITY) else {
                continue;
            };
            let sigma = noise.sigma(intr, uf, vf, hit.t);
            let g: f64 = StandardNormal.sample(&mut rng);
            let d = (hit.t + sigma * g).round();
            if d >= 1.0 && d <= u16::MAX as f64 {
                *out = d as u16;
            }
        }
    });
    DepthFrame::new(*intr, depths)
}

/// Camera-frame points for every nonzero pixel, in row-major order.
pub fn unproject(frame: &DepthFrame) -> PointCloud {
    let intr = frame.intrinsics();
    let w = intr.width as usize;
    let points = frame
        .depths()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != 0)
        .map(|(i, &d)| intr.unproject_pixel((i % w) as f64, (i / w) as f64, d as f64))
        .collect();
    PointCloud::new(points).expect("unprojected points are finite")
}

/// Like [`unproject`], with normals from differences across `step` pixels,
/// oriented toward the camera. Neighbors across depth discontinuities are
/// ignored; pixels with no usable neighbors get the reversed view ray.
pub fn unproject_with_normals(frame: &DepthFrame, step: usize) -> PointCloud {
    let intr = frame.intrinsics();
    let (w, h) = (intr.width as usize, intr.height as usize);
    let step = step.max(1);
    let point_at = |u: usize, v: usize| -> Option<Vec3> {
        let d = frame.depth(u, v);
        (d != 0).then(|| intr.unproject_pixel(u as f64, v as f64, d as f64))
    };
    let mut points = Vec::with_capacity(frame.valid_count());
    let mut normals = Vec::with_capacity(points.capacity());
    for v in 0..h {
        for u in 0..w {
            let Some(p) = point_at(u, v) else { continue };
            let near = |q: Option<Vec3>| q.filter(|q| (q.z - p.z).abs() <= discontinuity(p.z, step));
            let axis = |lo: Option<Vec3>, hi: Option<Vec3>| match (near(lo), near(hi)) {
                (Some(a), Some(b)) => Some(b - a),
                (None, Some(b)) => Some(b - p),
                (Some(a), None) => Some(p - a),
                (None, None) => None,
            };
            let du = axis(
                u.checked_sub(step).and_then(|x| point_at(x, v)),
                (u + step < w).then(|| point_at(u + step, v)).flatten(),
            );
            let dv = axis(
                v.checked_sub(step).and_then(|y| point_at(u, y)),
                (v + step < h).then(|| point_at(u, v + step)).flatten(),
            );
            let fallback = -p.normalize();
            let n = match (du, dv) {
                (Some(a), Some(b)) => a.cross(&b).try_normalize(1e-12).unwrap_or(fallback),
                _ => fallback,
            };
            normals.push(if n.dot(&p) > 0.0 { -n } else { n });
            points.push(p);
        }
    }
    PointCloud::with_normals(points, normals).expect("unprojected normals are unit length")
}

fn discontinuity(depth: f64, step: usize) -> f64 {
    (0.05 * depth).max(20.0) * step as f64
}

/// Unprojects every frame into the world and drops points on the wrong side
/// of the slice plane.
pub fn merge_scans(frames: &[(DepthFrame, CameraPose)], slice: &TableSliceParams) -> Result<PointCloud> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("merge_scans needs at least one frame"));
    }
    if !slice.z_cut.is_finite() {
        return Err(Error::InvalidGeometry(format!("z_cut {} is not finite", slice.z_cut)));
    }
    let clouds: Vec<PointCloud> = frames
        .par_iter()
        .map(|(frame, pose)| {
            transform_points(&pose.pose, &unproject_with_normals(frame, DEFAULT_NORMAL_STEP))
                .retain(|p| slice.keeps(p))
        })
        .collect();
    let merged = PointCloud::concat(&clouds);
    if merged.is_empty() {
        return Err(Error::EmptyScan { z_cut: slice.z_cut });
    }
    Ok(merged)
}

/// Renders every camera of a rig against one scene. Camera `i` uses seed
/// `seed + i`.
pub fn render_rig(
    scene: &TriMesh,
    rig: &[CameraPose],
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<(DepthFrame, CameraPose)>> {
    if scene.is_empty() {
        return Ok(rig.iter().map(|c| (DepthFrame::empty(*intr), c.clone())).collect());
    }
    let bvh = Bvh::build(scene)?;
    rig.iter()
        .enumerate()
        .map(|(i, cam)| {
            render_depth(scene, &bvh, cam, intr, noise, seed.wrapping_add(i as u64)).map(|f| (f, cam.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn plane_at(z: f64, half: f64) -> TriMesh {
        shapes::rectangle(Vec3::new(0.0, 0.0, z), half, half, 1, 1)
    }

    fn camera_at_origin() -> CameraPose {
        CameraPose::new("c0", RigidTransform::identity())
    }

    #[test]
    fn mkv2_focal_lengths() {
        let i = CameraIntrinsics::mkv2();
        // 256 / tan(35°) and 212 / tan(30°), evaluated independently.
        assert!((i.fx - 365.6059).abs() < 1e-3, "{}", i.fx);
        assert!((i.fy - 367.1950).abs() < 1e-3, "{}", i.fy);
        assert_eq!((i.cx, i.cy), (255.5, 211.5));
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let i = CameraIntrinsics::mkv2();
        assert_eq!(i.unproject_pixel(i.cx, i.cy, 1000.0), Vec3::new(0.0, 0.0, 1000.0));
    }

    #[test]
    fn plane_without_noise_reads_exact_depth() {
        let mesh = plane_at(1000.0, 2000.0);
        let bvh = Bvh::build(&mesh).unwrap();
        let intr = CameraIntrinsics::mkv2();
        let f = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &NoiseModel::none(), 1).unwrap();
        assert_eq!(f.depth(256, 212), 1000);
        assert_eq!(f.valid_count(), intr.pixel_count());
        for p in unproject(&f).points() {
            assert!((p.z - 1000.0).abs() <= 0.5);
        }
    }

    #[test]
    fn injected_sigma_is_recovered() {
        let mesh = plane_at(1000.0, 2000.0);
        let bvh = Bvh::build(&mesh).unwrap();
        let intr = CameraIntrinsics::mkv2();
        let noise = NoiseModel {
            sigma_base: 2.0,
            sigma_per_meter: 0.0,
            edge_falloff: 1.0,
        };
        let f = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &noise, 9).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in 112..312 {
            for u in 156..356 {
                let e = f.depth(u, v) as f64 - 1000.0;
                sum += e * e;
                n += 1;
            }
        }
        assert!(n >= 10_000);
        let rmse = (sum / n as f64).sqrt();
        assert!((1.8..=2.2).contains(&rmse), "{rmse}");
    }

    #[test]
    fn render_is_seed_deterministic() {
        let mesh = shapes::icosphere(Vec3::new(0.0, 0.0, 900.0), 200.0, 3);
        let bvh = Bvh::build(&mesh).unwrap();
        let intr = CameraIntrinsics::mkv2();
        let noise = NoiseModel::default();
        let a = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &noise, 5).unwrap();
        let b = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &noise, 5).unwrap();
        let c = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &noise, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_scene_renders_zeros() {
        let intr = CameraIntrinsics::mkv2();
        let frames = render_rig(&TriMesh::default(), &[camera_at_origin()], &intr, &NoiseModel::default(), 0).unwrap();
        assert_eq!(frames[0].0.valid_count(), 0);
    }

    #[test]
    fn project_unproject_round_trip() {
        let mesh = shapes::icosphere(Vec3::new(50.0, -30.0, 800.0), 250.0, 3);
        let bvh = Bvh::build(&mesh).unwrap();
        let intr = CameraIntrinsics::mkv2();
        let f = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &NoiseModel::default(), 2).unwrap();
        let cloud = unproject(&f);
        let pixels = f.depths().iter().enumerate().filter(|(_, &d)| d != 0).map(|(i, &d)| (i, d));
        for (p, (i, d)) in cloud.points().iter().zip(pixels) {
            let (u, v) = intr.project(p).unwrap();
            assert!((u - (i % 512) as f64).abs() < 0.5 && (v - (i / 512) as f64).abs() < 0.5);
            assert!((p.z - d as f64).abs() < 0.5);
        }
    }

    #[test]
    fn depth_grid_normals_face_camera() {
        let mesh = plane_at(1000.0, 2000.0);
        let bvh = Bvh::build(&mesh).unwrap();
        let intr = CameraIntrinsics::mkv2();
        let f = render_depth(&mesh, &bvh, &camera_at_origin(), &intr, &NoiseModel::none(), 0).unwrap();
        let cloud = unproject_with_normals(&f, 2);
        for n in cloud.normals().unwrap() {
            assert!(n.z < -0.99, "{n:?}");
        }
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let cam = CameraPose::look_at("top", Vec3::new(0.0, 0.0, 1000.0), Vec3::zeros(), Vec3::y()).unwrap();
        let axis = cam.pose.apply_vector(&Vec3::z());
        assert!((axis - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        // Image right is world +X for a camera looking down with +Y up.
        assert!((cam.pose.apply_vector(&Vec3::x()) - Vec3::x()).norm() < 1e-12);
        assert!(CameraPose::look_at("bad", Vec3::zeros(), Vec3::z(), Vec3::z()).is_err());
    }

    #[test]
    fn merge_slices_below_cut() {
        let table = shapes::rectangle(Vec3::zeros(), 600.0, 600.0, 2, 2);
        let body = shapes::icosphere(Vec3::new(0.0, 0.0, 100.0), 100.0, 3);
        let scene = TriMesh::merged([&table, &body]);
        let cam = CameraPose::look_at("c", Vec3::new(0.0, 0.0, 1000.0), Vec3::zeros(), Vec3::y()).unwrap();
        let frames = render_rig(&scene, &[cam], &CameraIntrinsics::mkv2(), &NoiseModel::default(), 3).unwrap();
        let slice = TableSliceParams::above(5.0);
        let all = transform_points(&frames[0].1.pose, &unproject(&frames[0].0));
        let merged = merge_scans(&frames, &slice).unwrap();
        assert!(merged.points().iter().all(|p| p.z >= 5.0));
        let kept = all.points().iter().filter(|p| p.z >= 5.0).count();
        assert_eq!(merged.len(), kept);
        assert!(merged.normals().is_some());
        assert!(matches!(
            merge_scans(&frames, &TableSliceParams::above(5000.0)),
            Err(Error::EmptyScan { .. })
        ));
        assert!(merge_scans(&[], &slice).is_err());
    }

    fn fit_sphere(points: &[Vec3]) -> (Vec3, f64) {
        // Linear least squares on |p|² = 2 c·p + (r² − |c|²).
        let mut a = nalgebra::DMatrix::<f64>::zeros(points.len(), 4);
        let mut b = nalgebra::DVector::<f64>::zeros(points.len());
        for (i, p) in points.iter().enumerate() {
            a.set_row(i, &nalgebra::RowDVector::from_row_slice(&[2.0 * p.x, 2.0 * p.y, 2.0 * p.z, 1.0]));
            b[i] = p.norm_squared();
        }
        let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
        let c = Vec3::new(x[0], x[1], x[2]);
        (c, (x[3] + c.norm_squared()).sqrt())
    }

    #[test]
    fn two_cameras_agree_on_one_sphere() {
        let center = Vec3::new(0.0, 0.0, 0.0);
        let sphere = shapes::icosphere(center, 150.0, 5);
        let a = CameraPose::look_at("a", Vec3::new(-700.0, 0.0, 700.0), center, Vec3::y()).unwrap();
        let b = CameraPose::look_at("b", Vec3::new(700.0, 0.0, 700.0), center, Vec3::y()).unwrap();
        let noise = NoiseModel::default();
        let frames = render_rig(&sphere, &[a, b], &CameraIntrinsics::mkv2(), &noise, 11).unwrap();
        let merged = merge_scans(&frames, &TableSliceParams::above(-1e9)).unwrap();
        let (c, r) = fit_sphere(merged.points());
        assert!((c - center).norm() < 1.0 && (r - 150.0).abs() < 1.0, "{c:?} {r}");
        let rmse = (merged.points().iter().map(|p| ((p - c).norm() - r).powi(2)).sum::<f64>()
            / merged.len() as f64)
            .sqrt();
        // Worst-case σ at ~1 m on the image edge plus quantization.
        let budget = noise.sigma(&CameraIntrinsics::mkv2(), 0.0, 0.0, 1000.0);
        assert!(rmse <= budget, "{rmse} > {budget}");
    }
}
