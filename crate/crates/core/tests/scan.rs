use proptest::prelude::*;
use roomsim::geometry::shapes;
use roomsim::scan::{
    merge_scans, render_rig, unproject, CameraIntrinsics, CameraPose, DepthFrame, NoiseModel, TableSliceParams,
};
use roomsim::{RigidTransform, Vec3};

fn small_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::from_fov(96, 80, 70.0, 60.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn project_inverts_unproject(depths in prop::collection::vec(0u16..4000, 96 * 80)) {
        let intr = small_intrinsics();
        let frame = DepthFrame::new(intr, depths).unwrap();
        let w = intr.width as usize;
        let cloud = unproject(&frame);
        let pixels = frame.depths().iter().enumerate().filter(|(_, d)| **d != 0);
        for (p, (i, &d)) in cloud.points().iter().zip(pixels) {
            let (u, v) = intr.project(p).unwrap();
            prop_assert!((u - (i % w) as f64).abs() < 0.5 && (v - (i / w) as f64).abs() < 0.5);
            prop_assert!((p.z - d as f64).abs() < 0.5);
        }
    }

    #[test]
    fn noiseless_plane_reads_its_distance(z in 400.0f64..3000.0) {
        let plane = shapes::rectangle(Vec3::new(0.0, 0.0, z), 5000.0, 5000.0, 1, 1);
        let cam = CameraPose::new("c", RigidTransform::identity());
        let frames = render_rig(&plane, &[cam], &small_intrinsics(), &NoiseModel::none(), 0).unwrap();
        let cloud = unproject(&frames[0].0);
        prop_assert_eq!(cloud.len(), 96 * 80);
        for p in cloud.points() {
            prop_assert!((p.z - z).abs() <= 0.5);
        }
    }

    #[test]
    fn slicing_only_drops_points_below_the_cut(z_cut in -200.0f64..100.0, seed in 0u64..1000) {
        let scene = shapes::icosphere(Vec3::zeros(), 150.0, 3);
        let rig = vec![
            CameraPose::look_at("a", Vec3::new(0.0, -300.0, 900.0), Vec3::zeros(), Vec3::y()).unwrap(),
            CameraPose::look_at("b", Vec3::new(600.0, 0.0, 600.0), Vec3::zeros(), Vec3::y()).unwrap(),
        ];
        let frames = render_rig(&scene, &rig, &small_intrinsics(), &NoiseModel::default(), seed).unwrap();
        let all = merge_scans(&frames, &TableSliceParams::above(-1e9)).unwrap();
        let total: usize = frames.iter().map(|(f, _)| f.valid_count()).sum();
        prop_assert_eq!(all.len(), total);
        let below = all.points().iter().filter(|p| p.z < z_cut).count();
        match merge_scans(&frames, &TableSliceParams::above(z_cut)) {
            Ok(kept) => {
                prop_assert_eq!(kept.len(), total - below);
                prop_assert!(kept.points().iter().all(|p| p.z >= z_cut));
                prop_assert!(kept.normals().is_some());
            }
            Err(_) => prop_assert_eq!(below, total),
        }
    }
}

#[test]
fn zero_frames_is_an_error() {
    assert!(merge_scans(&[], &TableSliceParams::above(0.0)).is_err());
}

#[test]
fn mkv2_focal_lengths_follow_field_of_view() {
    let intr = CameraIntrinsics::mkv2();
    // 256 / tan(35°) and 212 / tan(30°), evaluated independently.
    assert!((intr.fx - 365.605_889_7).abs() < 1e-6);
    assert!((intr.fy - 367.194_771_2).abs() < 1e-6);
    assert_eq!((intr.cx, intr.cy), (255.5, 211.5));
}
