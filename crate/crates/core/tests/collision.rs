mod common;

use common::*;
use proptest::prelude::*;
use rayon::prelude::*;
use roomsim::collide::{check_collision, clearance_sweep, CollisionBody};
use roomsim::geometry::shapes;
use roomsim::machine::{Attachment, PosedComponent, PosedScene};
use roomsim::{RigidTransform, Vec3};

#[test]
fn bvh_matches_brute_force_on_random_scenes() {
    let failures: Vec<String> = (0..120u64)
        .into_par_iter()
        .filter_map(|seed| oracle_mismatch(&random_scene(seed), 1e-6).map(|m| format!("seed {seed}: {m}")))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn random_scenes_cover_both_outcomes() {
    let hits = (0..120u64).filter(|&s| check_collision(&random_scene(s), None).is_collision()).count();
    assert!(hits > 10 && hits < 110, "{hits} colliding scenes");
}

#[test]
fn pair_order_does_not_matter() {
    for seed in 0..20 {
        let scene = random_scene(seed);
        let mut reversed = scene.components().to_vec();
        reversed.reverse();
        let a = check_collision(&scene, None);
        let b = check_collision(&PosedScene::new(reversed, vec![]), None);
        assert_eq!(a.status, b.status);
        assert!((a.min_clearance_mm - b.min_clearance_mm).abs() < 1e-9);
        let names = |r: &roomsim::collide::CollisionReport| {
            let mut v: Vec<_> = r
                .colliding_pairs
                .iter()
                .map(|p| if p.a <= p.b { (p.a.clone(), p.b.clone()) } else { (p.b.clone(), p.a.clone()) })
                .collect();
            v.sort();
            v
        };
        assert_eq!(names(&a), names(&b));
    }
}

fn body_at(name: &str, mesh: roomsim::TriMesh, pose: RigidTransform) -> PosedComponent {
    PosedComponent {
        name: name.into(),
        body: CollisionBody::new(mesh).unwrap(),
        pose,
        attachment: Attachment::Fixed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn shrinking_never_creates_contact(
        dx in 0.0f64..160.0, dy in -40.0f64..40.0, s in 0.3f64..1.0, r in 0.0f64..3.0,
    ) {
        let cube = shapes::cuboid(Vec3::zeros(), Vec3::new(60.0, 40.0, 30.0));
        let ball = shapes::icosphere(Vec3::zeros(), 45.0, 2);
        let pose = RigidTransform::from_translation(Vec3::new(dx, dy, 10.0)).compose(&RigidTransform::rotation_z_deg(r * 30.0));
        let full = PosedScene::new(vec![body_at("cube", cube.clone(), RigidTransform::identity()), body_at("ball", ball.clone(), pose)], vec![]);
        let shrunk_ball = ball.scaled_about(&Vec3::zeros(), s).unwrap();
        let shrunk = PosedScene::new(vec![body_at("cube", cube, RigidTransform::identity()), body_at("ball", shrunk_ball, pose)], vec![]);
        if !check_collision(&full, None).is_collision() {
            prop_assert!(!check_collision(&shrunk, None).is_collision());
        }
    }

    #[test]
    fn clearance_is_lipschitz_in_pose(
        x in 150.0f64..300.0, dx in -20.0f64..20.0, dz in -20.0f64..20.0, rot in -10.0f64..10.0,
    ) {
        let a = shapes::cuboid(Vec3::zeros(), Vec3::new(50.0, 50.0, 50.0));
        let b = shapes::icosphere(Vec3::zeros(), 40.0, 2);
        let p1 = RigidTransform::from_translation(Vec3::new(x, 0.0, 0.0));
        let p2 = RigidTransform::from_translation(Vec3::new(x + dx, 0.0, dz)).compose(&RigidTransform::rotation_z_deg(rot));
        let moved = b.vertices().iter().map(|v| (p1.apply_point(v) - p2.apply_point(v)).norm()).fold(0.0, f64::max);
        let c = |p: RigidTransform| {
            check_collision(&PosedScene::new(vec![body_at("a", a.clone(), RigidTransform::identity()), body_at("b", b.clone(), p)], vec![]), None).min_clearance_mm
        };
        prop_assert!((c(p1) - c(p2)).abs() <= moved + 1e-9);
    }
}

#[test]
fn sweep_flags_first_state_past_contact_angle() {
    let geom = probe_geometry();
    let angles: Vec<f64> = (0..=18).map(|i| i as f64 * 10.0).collect();
    let sweep = clearance_sweep(&geom, &gantry_states(&geom, angles.iter().copied()), None);
    let first = sweep
        .iter()
        .position(|e| e.outcome.as_ref().unwrap().is_collision())
        .expect("the probe must hit the obstacle");
    let contact = probe_contact_deg();
    assert!(angles[first] >= contact, "{} < {contact}", angles[first]);
    assert!(first == 0 || angles[first - 1] < contact);
    assert_eq!(angles[first], 140.0);
    for e in &sweep[..first] {
        assert!(!e.outcome.as_ref().unwrap().is_collision());
    }
}

#[test]
fn sweep_edge_cases() {
    let geom = probe_geometry();
    assert!(clearance_sweep(&geom, &[], None).is_empty());
    let same = gantry_states(&geom, [60.0; 3]);
    let out = clearance_sweep(&geom, &same, None);
    let reports: Vec<_> = out.iter().map(|e| e.outcome.as_ref().unwrap().clone()).collect();
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sweep_keeps_order_and_marks_bad_states() {
    let geom = probe_geometry();
    let mut limits = *geom.limits();
    limits.gantry_deg.max = 500.0;
    let mut states = gantry_states(&geom, [10.0, 20.0]);
    let wide = roomsim::machine::MachineState::new(geom.kind(), limits);
    states.insert(1, roomsim::machine::set_joints(&wide, &roomsim::machine::JointUpdate { gantry_deg: Some(300.0), ..Default::default() }).unwrap());
    let out = clearance_sweep(&geom, &states, None);
    assert_eq!(out.len(), 3);
    assert!(out[0].outcome.is_ok() && out[2].outcome.is_ok());
    assert!(out[1].outcome.is_err());
    assert_eq!(out[2].state.gantry_deg(), 20.0);
}
