use nalgebra::Matrix3;

use super::CameraPose;
use crate::geometry::{RigidTransform, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub pose: CameraPose,
    /// Root mean square of the Euclidean residuals, mm.
    pub residual_rms_mm: f64,
}

/// Least-squares rigid registration of camera-frame points onto their world
/// counterparts (Kabsch with a reflection guard).
pub fn calibrate_pose(camera_id: &str, world: &[Vec3], camera: &[Vec3]) -> Result<Calibration> {
    if world.len() != camera.len() {
        return Err(Error::CalibrationDegenerate(format!(
            "{} world points but {} camera points",
            world.len(),
            camera.len()
        )));
    }
    if world.len() < 3 {
        return Err(Error::CalibrationDegenerate(format!(
            "need at least 3 correspondences, got {}",
            world.len()
        )));
    }
    if world.iter().chain(camera).any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::CalibrationDegenerate("non-finite correspondence".into()));
    }
    let n = world.len() as f64;
    let cw = world.iter().sum::<Vec3>() / n;
    let cc = camera.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    for (w, c) in world.iter().zip(camera) {
        let (dc, dw) = (c - cc, w - cw);
        h += dc * dw.transpose();
        spread += dc * dc.transpose();
    }
    let sv = spread.symmetric_eigenvalues();
    let mut s = [sv[0], sv[1], sv[2]];
    s.sort_by(|a, b| b.total_cmp(a));
    if s[0] <= 0.0 || s[1] <= 1e-12 * s[0] {
        return Err(Error::CalibrationDegenerate("correspondences are collinear".into()));
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let translation = cw - rotation * cc;
    let pose = RigidTransform::new(rotation, translation)?;
    let sq: f64 = world
        .iter()
        .zip(camera)
        .map(|(w, c)| (pose.apply_point(c) - w).norm_squared())
        .sum();
    Ok(Calibration {
        pose: CameraPose::new(camera_id, pose),
        residual_rms_mm: (sq / n).sqrt(),
    })
}
