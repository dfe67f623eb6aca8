#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomsim::collide::{tritri, CollisionBody, PairKey};
use roomsim::geometry::shapes;
use roomsim::machine::{
    set_joints, Attachment, Component, Frame, JointLimits, JointUpdate, MachineGeometry, MachineKind, MachineState,
    Parent, PosedComponent, PosedScene,
};
use roomsim::{RigidTransform, TriMesh, Vec3};

/// All-pairs answer for one component pair.
pub struct BruteForce {
    pub intersecting: Vec<[usize; 2]>,
    pub distance: f64,
}

pub fn brute_force(a: &PosedComponent, b: &PosedComponent) -> BruteForce {
    let wa = a.world_mesh();
    let wb = b.world_mesh();
    let mut intersecting = Vec::new();
    let mut distance = f64::INFINITY;
    for i in 0..wa.triangle_count() {
        let ta = wa.triangle(i);
        for j in 0..wb.triangle_count() {
            let tb = wb.triangle(j);
            if tritri::intersects(&ta, &tb) {
                intersecting.push([i, j]);
                distance = 0.0;
            } else if distance > 0.0 {
                distance = distance.min(tritri::distance(&ta, &tb).0);
            }
        }
    }
    BruteForce { intersecting, distance }
}

fn random_shape(rng: &mut ChaCha8Rng) -> TriMesh {
    let size = rng.random_range(20.0..90.0);
    match rng.random_range(0..4) {
        0 => shapes::icosphere(Vec3::zeros(), size, rng.random_range(1..=3)),
        1 => shapes::cuboid(
            Vec3::zeros(),
            Vec3::new(size, rng.random_range(10.0..90.0), rng.random_range(10.0..90.0)),
        ),
        2 => shapes::cylinder(Vec3::zeros(), size, rng.random_range(20.0..150.0), rng.random_range(8..96)),
        _ => shapes::ellipsoid(
            Vec3::zeros(),
            Vec3::new(size, 0.6 * size, 1.3 * size),
            rng.random_range(6..40),
            rng.random_range(4..20),
            rng.random_range(2.0..3.0),
        ),
    }
}

fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> RigidTransform {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0));
    let rot = RigidTransform::from_axis_angle(axis.normalize(), rng.random_range(0.0..std::f64::consts::TAU));
    let t = Vec3::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
    );
    RigidTransform::from_translation(t).compose(&rot)
}

/// Two to four random convex-ish components scattered around the origin.
pub fn random_scene(seed: u64) -> PosedScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let spread = rng.random_range(40.0..200.0);
    let comps = (0..n)
        .map(|i| PosedComponent {
            name: format!("c{i}"),
            body: CollisionBody::new(random_shape(&mut rng)).unwrap(),
            pose: random_pose(&mut rng, spread),
            attachment: Attachment::Fixed,
        })
        .collect();
    PosedScene::new(comps, vec![])
}

/// Center of the obstacle on the gantry-probe circle.
pub const PROBE_RADIUS_MM: f64 = 500.0;
pub const PROBE_SPHERE_MM: f64 = 20.0;
pub const OBSTACLE_ANGLE_DEG: f64 = 140.0;

/// Gantry angle at which two exact spheres of radius [`PROBE_SPHERE_MM`]
/// first touch.
pub fn probe_contact_deg() -> f64 {
    OBSTACLE_ANGLE_DEG - 2.0 * (PROBE_SPHERE_MM / PROBE_RADIUS_MM).asin().to_degrees()
}

/// A sphere riding the gantry and a fixed sphere on the same circle.
pub fn probe_geometry() -> MachineGeometry {
    let sphere = || CollisionBody::new(shapes::icosphere(Vec3::zeros(), PROBE_SPHERE_MM, 3)).unwrap();
    let a = OBSTACLE_ANGLE_DEG.to_radians();
    let comps = vec![
        Component {
            name: "probe".into(),
            body: sphere(),
            parent: Parent::Frame(Frame::Gantry),
            mount: RigidTransform::from_translation(Vec3::new(0.0, 0.0, PROBE_RADIUS_MM)),
        },
        Component {
            name: "obstacle".into(),
            body: sphere(),
            parent: Parent::Frame(Frame::Room),
            mount: RigidTransform::from_translation(Vec3::new(
                PROBE_RADIUS_MM * a.sin(),
                0.0,
                PROBE_RADIUS_MM * a.cos(),
            )),
        },
    ];
    MachineGeometry::new(MachineKind::Xrt, 1000.0, JointLimits::default(), comps, vec![]).unwrap()
}

pub fn gantry_states(geom: &MachineGeometry, angles: impl IntoIterator<Item = f64>) -> Vec<MachineState> {
    angles
        .into_iter()
        .map(|g| set_joints(&geom.default_state(), &JointUpdate { gantry_deg: Some(g), ..Default::default() }).unwrap())
        .collect()
}

pub fn all_pairs(scene: &PosedScene) -> Vec<PairKey> {
    let c = scene.components();
    let mut out = Vec::new();
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            out.push(PairKey::new(&c[i].name, &c[j].name));
        }
    }
    out
}

/// Compares the accelerated report with all-pairs testing; `None` when they
/// agree within `tol` mm.
pub fn oracle_mismatch(scene: &PosedScene, tol: f64) -> Option<String> {
    use roomsim::collide::check_collision;
    let report = check_collision(scene, None);
    let c = scene.components();
    let mut expected_pairs = Vec::new();
    let mut min_distance = f64::INFINITY;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            let bf = brute_force(&c[i], &c[j]);
            if !bf.intersecting.is_empty() {
                expected_pairs.push((c[i].name.clone(), c[j].name.clone(), bf.intersecting));
            } else {
                min_distance = min_distance.min(bf.distance);
            }
        }
    }
    if report.is_collision() != !expected_pairs.is_empty() {
        return Some(format!("status {:?}, brute force found {} pairs", report.status, expected_pairs.len()));
    }
    if report.is_collision() {
        if report.colliding_pairs.len() != expected_pairs.len() {
            return Some("colliding pair sets differ".into());
        }
        for p in &report.colliding_pairs {
            let Some((_, _, all)) = expected_pairs.iter().find(|(a, b, _)| *a == p.a && *b == p.b) else {
                return Some(format!("unexpected pair {}/{}", p.a, p.b));
            };
            if p.witnesses.is_empty() || p.witnesses.iter().any(|w| !all.contains(w)) {
                return Some(format!("bad witnesses for {}/{}", p.a, p.b));
            }
        }
        if report.min_clearance_mm != 0.0 {
            return Some("collision with nonzero clearance".into());
        }
        return None;
    }
    if (report.min_clearance_mm - min_distance).abs() > tol {
        return Some(format!("clearance {} vs {}", report.min_clearance_mm, min_distance));
    }
    let cp = report.closest_pair.as_ref()?;
    let gap = (Vec3::from(cp.point_a) - Vec3::from(cp.point_b)).norm();
    if (gap - report.min_clearance_mm).abs() > tol {
        return Some(format!("closest points {gap} apart, clearance {}", report.min_clearance_mm));
    }
    None
}

/// `n` points uniform on a sphere of radius `r` at the origin, with outward
/// normals.
pub fn sphere_cloud(n: usize, r: f64, seed: u64) -> roomsim::PointCloud {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normals = Vec::with_capacity(n);
    while normals.len() < n {
        let v = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        if let Some(u) = v.try_normalize(1e-9) {
            normals.push(u);
        }
    }
    let points = normals.iter().map(|u| u * r).collect();
    roomsim::PointCloud::with_normals(points, normals).unwrap()
}
