use serde::{Deserialize, Serialize};

use super::{metrics, MetricsReport};
use crate::collide::Bvh;
use crate::geometry::{shapes, RigidTransform, Vec3};
use crate::scan::{render_depth, unproject, CameraIntrinsics, CameraPose, NoiseModel};
use crate::{Error, Result};

/// Plate sizes (width × height, meters) of the bench protocol.
pub const PLATE_SIZES_M: [(f64, f64); 3] = [(1.0, 0.6), (0.6, 0.6), (0.4, 0.4)];

/// A flat plate facing the camera squarely at `distance_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatSurfaceSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub distance_m: f64,
    pub repeats: usize,
}

impl FlatSurfaceSpec {
    pub fn new(width_m: f64, height_m: f64, distance_m: f64) -> Self {
        Self {
            width_m,
            height_m,
            distance_m,
            repeats: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.width_m, self.height_m, self.distance_m];
        if !dims.iter().all(|d| d.is_finite() && *d > 0.0) || self.repeats == 0 {
            return Err(Error::InvalidGeometry(format!("bad flat surface spec {self:?}")));
        }
        Ok(())
    }

    /// Every plate at 1 m and 2 m.
    pub fn bench() -> Vec<FlatSurfaceSpec> {
        [1.0, 2.0]
            .iter()
            .flat_map(|&d| PLATE_SIZES_M.iter().map(move |&(w, h)| FlatSurfaceSpec::new(w, h, d)))
            .collect()
    }
}

/// Renders the plate `repeats` times (seeds `seed`, `seed + 1`, ...) and
/// scores every returned point by its signed distance to the true plane.
/// The result is the mean of the per-run reports.
pub fn flat_surface_protocol(spec: &FlatSurfaceSpec, noise: &NoiseModel, seed: u64) -> Result<MetricsReport> {
    spec.validate()?;
    let z = spec.distance_m * 1000.0;
    let plate = shapes::rectangle(
        Vec3::new(0.0, 0.0, z),
        spec.width_m * 500.0,
        spec.height_m * 500.0,
        1,
        1,
    );
    let bvh = Bvh::build(&plate)?;
    let camera = CameraPose::new("bench", RigidTransform::identity());
    let intr = CameraIntrinsics::mkv2();
    let runs = (0..spec.repeats as u64)
        .map(|r| {
            let frame = render_depth(&plate, &bvh, &camera, &intr, noise, seed.wrapping_add(r))?;
            let residuals: Vec<f64> = unproject(&frame).points().iter().map(|p| p.z - z).collect();
            metrics(&residuals)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::mean(&runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_plate_is_exact() {
        let m = flat_surface_protocol(&FlatSurfaceSpec::new(0.4, 0.4, 1.0), &NoiseModel::none(), 0).unwrap();
        assert!(m.max_mm <= 0.5);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = FlatSurfaceSpec { repeats: 2, ..FlatSurfaceSpec::new(0.4, 0.4, 1.0) };
        let a = flat_surface_protocol(&spec, &NoiseModel::default(), 3).unwrap();
        let b = flat_surface_protocol(&spec, &NoiseModel::default(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bench_has_six_configurations() {
        assert_eq!(FlatSurfaceSpec::bench().len(), 6);
        assert!(FlatSurfaceSpec::new(0.0, 1.0, 1.0).validate().is_err());
    }
}
