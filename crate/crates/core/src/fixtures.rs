//! Synthetic scenes used by the examples, the CLI and the test suites.

use crate::error::Result;
use crate::geometry::{shapes, RigidTransform, TriMesh, Vec3};
use crate::machine::{standin, MachineGeometry, MachineKind};
use crate::scan::CameraPose;

/// Triangle count of [`torso`].
pub const TORSO_TRIANGLES: usize = 160_000;

/// Slice height that removes the couch plate from [`scan_scene`] clouds.
/// The margin keeps noisy plate samples (σ up to ~4 mm at the image edge) out.
pub const SCAN_Z_CUT_MM: f64 = standin::COUCH_SURFACE_Z_MM + 15.0;

/// Camera standoff of [`scan_rig`].
pub const RIG_STANDOFF_MM: f64 = 1000.0;

/// A flattened superellipsoid torso, about 350 × 400 × 220 mm (x × y × z), long
/// axis along +Y, centered at the origin. Exactly 160,000 triangles.
pub fn torso() -> TriMesh {
    let m = shapes::ellipsoid(Vec3::zeros(), Vec3::new(175.0, 110.0, 200.0), 400, 201, 2.6);
    // Long axis z → y, depth y → z.
    m.transformed(&RigidTransform::rotation_x_deg(-90.0))
}

/// Ellipsoid lying along +Y with its lowest point on `floor_z`.
fn lying(center_xy: [f64; 2], half: Vec3, floor_z: f64, exponent: f64) -> TriMesh {
    let m = shapes::ellipsoid(Vec3::zeros(), Vec3::new(half.x, half.z, half.y), 64, 33, exponent);
    let m = m.transformed(&RigidTransform::rotation_x_deg(-90.0));
    m.transformed(&RigidTransform::from_translation(Vec3::new(
        center_xy[0],
        center_xy[1],
        floor_z + half.z,
    )))
}

/// A supine mannequin in room coordinates at zero couch travel: head toward
/// +Y ending short of the head fixation, back on the couch surface.
pub fn mannequin() -> TriMesh {
    let floor = standin::COUCH_SURFACE_Z_MM;
    let parts = [
        lying([0.0, 330.0], Vec3::new(80.0, 100.0, 90.0), floor, 2.0),
        lying([0.0, 215.0], Vec3::new(55.0, 45.0, 60.0), floor + 15.0, 2.0),
        lying([0.0, -100.0], Vec3::new(175.0, 300.0, 110.0), floor, 2.6),
        lying([-90.0, -800.0], Vec3::new(70.0, 420.0, 65.0), floor, 2.2),
        lying([90.0, -800.0], Vec3::new(70.0, 420.0, 65.0), floor, 2.2),
    ];
    TriMesh::merged(parts.iter())
}

/// Mannequin on a couch plate, as seen by the scanner.
pub fn scan_scene() -> TriMesh {
    let plate = shapes::rectangle(
        Vec3::new(0.0, -500.0, standin::COUCH_SURFACE_Z_MM),
        260.0,
        1000.0,
        4,
        16,
    );
    TriMesh::merged([&mannequin(), &plate])
}

/// Four ceiling cameras, one per quadrant over the couch, each 30° from
/// vertical at [`RIG_STANDOFF_MM`] from its target.
pub fn scan_rig() -> Vec<CameraPose> {
    let tilt = 30f64.to_radians();
    let (side, up) = (RIG_STANDOFF_MM * tilt.sin(), RIG_STANDOFF_MM * tilt.cos());
    let targets = [
        ("upper_left", -1.0, 50.0),
        ("upper_right", 1.0, 50.0),
        ("lower_left", -1.0, -750.0),
        ("lower_right", 1.0, -750.0),
    ];
    targets
        .iter()
        .map(|&(id, sx, y)| {
            let target = Vec3::new(0.0, y, -60.0);
            CameraPose::look_at(id, target + Vec3::new(sx * side, 0.0, up), target, Vec3::y())
                .expect("rig cameras are not looking along +Y")
        })
        .collect()
}

/// The XRT stand-in with [`mannequin`] on the couch.
pub fn scenario_geometry() -> Result<MachineGeometry> {
    MachineGeometry::standin(MachineKind::Xrt).attach_patient(mannequin(), RigidTransform::identity())
}
