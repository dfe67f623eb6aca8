//! Procedural machine geometry used when no scanned component meshes are
//! available. Dimensions are typical for a C-arm linac at SAD 1000 mm.

use super::{Component, Frame, JointLimits, MachineGeometry, MachineKind, Parent};
use crate::collide::{CollisionBody, PairKey};
use crate::geometry::{shapes, RigidTransform, TriMesh, Vec3};

pub const GANTRY_ARM: &str = "gantry_arm";
pub const GANTRY_HEAD: &str = "gantry_head";
pub const COLLIMATOR_HOUSING: &str = "collimator_housing";
pub const COUCH_TOP: &str = "couch_top";
pub const COUCH_BASE: &str = "couch_base";
pub const HEAD_FIXATION: &str = "head_fixation";

/// Distance from isocenter to the collimator face at gantry 0.
pub const XRT_COLLIMATOR_FACE_MM: f64 = 430.0;
pub const PT_SNOUT_FACE_MM: f64 = 300.0;
/// Couch top upper surface height at zero couch translation.
pub const COUCH_SURFACE_Z_MM: f64 = -150.0;

struct Dims {
    head_half: Vec3,
    head_center_z: f64,
    coll_bottom_half: f64,
    coll_top_half: f64,
    coll_face_z: f64,
}

fn dims(kind: MachineKind) -> Dims {
    match kind {
        MachineKind::Xrt => Dims {
            head_half: Vec3::new(400.0, 350.0, 350.0),
            head_center_z: 950.0,
            coll_bottom_half: 150.0,
            coll_top_half: 250.0,
            coll_face_z: XRT_COLLIMATOR_FACE_MM,
        },
        MachineKind::Pt => Dims {
            head_half: Vec3::new(450.0, 400.0, 350.0),
            head_center_z: 950.0,
            coll_bottom_half: 200.0,
            coll_top_half: 320.0,
            coll_face_z: PT_SNOUT_FACE_MM,
        },
    }
}

fn component(name: &str, mesh: TriMesh, parent: Parent, mount: RigidTransform) -> Component {
    Component {
        name: name.to_string(),
        body: CollisionBody::new(mesh).expect("stand-in meshes are non-empty"),
        parent,
        mount,
    }
}

pub(super) fn build(kind: MachineKind) -> MachineGeometry {
    let d = dims(kind);
    let at = |x: f64, y: f64, z: f64| RigidTransform::from_translation(Vec3::new(x, y, z));
    let head_bottom = d.head_center_z - d.head_half.z;

    let arm_center = Vec3::new(0.0, d.head_half.y + 725.0, 1000.0);
    let arm = component(
        GANTRY_ARM,
        shapes::cuboid(Vec3::zeros(), Vec3::new(400.0, 725.0, 400.0)),
        Parent::Frame(Frame::Gantry),
        RigidTransform::from_translation(arm_center),
    );
    let head = component(
        GANTRY_HEAD,
        shapes::cuboid(Vec3::zeros(), d.head_half),
        Parent::Component(GANTRY_ARM.into()),
        at(0.0, -arm_center.y, d.head_center_z - arm_center.z),
    );
    let coll_half_h = (head_bottom - d.coll_face_z) / 2.0;
    let collimator = component(
        COLLIMATOR_HOUSING,
        shapes::frustum(
            Vec3::zeros(),
            [d.coll_bottom_half; 2],
            [d.coll_top_half; 2],
            coll_half_h,
        ),
        Parent::Frame(Frame::Collimator),
        at(0.0, 0.0, d.coll_face_z + coll_half_h),
    );
    let couch_top = component(
        COUCH_TOP,
        shapes::cuboid(Vec3::zeros(), Vec3::new(260.0, 1000.0, 25.0)),
        Parent::Frame(Frame::Tabletop),
        at(0.0, -500.0, COUCH_SURFACE_Z_MM - 25.0),
    );
    let couch_base = component(
        COUCH_BASE,
        shapes::cuboid(Vec3::zeros(), Vec3::new(200.0, 300.0, 450.0)),
        Parent::Frame(Frame::Turntable),
        at(0.0, -900.0, -700.0),
    );
    // Indexed in the couch top's mesh frame: top surface at local z = +25,
    // head end at local y = +1000.
    let fixation = component(
        HEAD_FIXATION,
        shapes::cuboid(Vec3::zeros(), Vec3::new(150.0, 20.0, 100.0)),
        Parent::Component(COUCH_TOP.into()),
        at(0.0, 970.0, 125.0),
    );
    MachineGeometry::new(
        kind,
        1000.0,
        JointLimits::default(),
        vec![arm, head, collimator, couch_top, couch_base, fixation],
        vec![
            PairKey::new(COLLIMATOR_HOUSING, GANTRY_HEAD),
            PairKey::new(COUCH_TOP, COUCH_BASE),
        ],
    )
    .expect("stand-in geometry is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collide::check_collision;
    use crate::machine::forward_kinematics;

    #[test]
    fn default_pose_is_clear_for_both_kinds() {
        for kind in [MachineKind::Xrt, MachineKind::Pt] {
            let geom = MachineGeometry::standin(kind);
            let scene = forward_kinematics(&geom, &geom.default_state()).unwrap();
            let report = check_collision(&scene, None);
            assert!(!report.is_collision(), "{kind:?}: {report:?}");
        }
    }

    #[test]
    fn pt_snout_is_larger() {
        let xrt = MachineGeometry::standin(MachineKind::Xrt);
        let pt = MachineGeometry::standin(MachineKind::Pt);
        let vol = |g: &MachineGeometry| g.component(COLLIMATOR_HOUSING).unwrap().body.mesh().signed_volume();
        assert!(vol(&pt) > vol(&xrt));
    }

    #[test]
    fn collimator_face_height() {
        let geom = MachineGeometry::standin(MachineKind::Xrt);
        let scene = forward_kinematics(&geom, &geom.default_state()).unwrap();
        let m = scene.component(COLLIMATOR_HOUSING).unwrap().world_mesh();
        let lowest = m.vertices().iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        assert!((lowest - XRT_COLLIMATOR_FACE_MM).abs() < 1e-9);
        let top = scene.component(COUCH_TOP).unwrap().world_mesh();
        let surface = top.vertices().iter().map(|v| v.z).fold(f64::NEG_INFINITY, f64::max);
        assert!((surface - COUCH_SURFACE_Z_MM).abs() < 1e-9);
    }
}
