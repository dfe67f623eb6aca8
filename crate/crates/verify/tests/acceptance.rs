//! Acceptance suite. Runs every primary criterion at its stated tolerance
//! and prints one PASS/FAIL line each; exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomsim::collide::Bvh;
use roomsim::evalkit::{
    compose_budget, flat_surface_protocol, metrics, run_scenarios, synthetic_scenarios, FlatSurfaceSpec, MetricsReport,
};
use roomsim::fixtures;
use roomsim::machine::{forward_kinematics, set_joints, JointUpdate};
use roomsim::scan::NoiseModel;
use roomsim::surface::{
    decimate, filter_by_quality, marching_cubes, reconstruct, DecimationParams, QualityMap, ReconParams, ScalarVolume,
    DEFAULT_FILTER_K,
};
use roomsim::{TriMesh, Vec3};
use roomsim_service::pipeline::{run_pipeline, PipelineParams, ScanSource};
use roomsim_service::x3d::{self, Precision};

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Largest distance from points sampled on `mesh` to the surface of `reference`.
fn one_sided_hausdorff(mesh: &TriMesh, reference: &TriMesh) -> f64 {
    let tree = Bvh::build(reference).unwrap();
    let samples = [
        (0.0, 0.0),
        (1.0, 0.0),
        (0.0, 1.0),
        (1.0 / 3.0, 1.0 / 3.0),
        (0.5, 0.0),
        (0.0, 0.5),
        (0.5, 0.5),
        (0.2, 0.6),
        (0.6, 0.2),
    ];
    let mut worst: f64 = 0.0;
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(t);
        for (u, v) in samples {
            let p = a + (b - a) * u + (c - a) * v;
            worst = worst.max(tree.closest_point(reference, &p).0);
        }
    }
    worst
}

fn decimation_endpoint() -> Verdict {
    let torso = fixtures::torso();
    let start = Instant::now();
    let out = decimate(&torso, &DecimationParams::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let h = one_sided_hausdorff(&out.mesh, &torso);
    let n = out.mesh.triangle_count();
    let detail = format!(
        "{} → {n} triangles in {} rounds, Hausdorff {h:.3} mm, {secs:.1} s",
        torso.triangle_count(),
        out.rounds.len()
    );
    ensure(
        torso.triangle_count() == 160_000 && n < 16_000 && out.rounds.len() == 22 && h <= 1.0 && secs < 30.0,
        detail,
    )
}

fn pipeline_budget(patient: &mut Option<TriMesh>) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run_pipeline(&ScanSource::Synthetic, &PipelineParams::default(), dir.path()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let r = &out.run;
    let detail = format!(
        "{secs:.2} s wall ({:.0} ms recorded), {} points → {} → {} triangles",
        r.total_ms, r.cloud_points, r.reconstructed_triangles, r.output_triangles
    );
    *patient = Some(out.mesh);
    ensure(secs < 10.0 && r.output_triangles < 16_000, detail)
}

fn reconstruction_accuracy() -> Verdict {
    let cloud = common::sphere_cloud(100_000, 50.0, 3);
    let mesh = reconstruct(&cloud, &ReconParams::with_grid(256)).map_err(|e| e.to_string())?;
    let q = QualityMap::compute(&mesh, &cloud).map_err(|e| e.to_string())?;
    let f = filter_by_quality(&mesh, &q, DEFAULT_FILTER_K).map_err(|e| e.to_string())?;
    let rmse = q.summary.rmse_mm;
    let detail = format!("RMSE {rmse:.3} mm, filter cutoff {:.3} mm", f.cutoff_mm);
    ensure(rmse <= 1.4 && (f.cutoff_mm - 3.0 * rmse).abs() < 1e-12, detail)
}

fn flat_surface() -> Verdict {
    let spec = FlatSurfaceSpec::new(1.0, 0.6, 1.0);
    let base = flat_surface_protocol(&spec, &NoiseModel::default(), 9).map_err(|e| e.to_string())?;
    let doubled = flat_surface_protocol(&spec, &NoiseModel::default().scaled(2.0), 9).map_err(|e| e.to_string())?;
    let ratio = doubled.rmse_mm / base.rmse_mm;
    let detail = format!("RMSE at 1 m {:.3} mm, σ×2 ratio {ratio:.3}", base.rmse_mm);
    ensure(base.rmse_mm > 0.0 && base.rmse_mm < 4.0 && (ratio - 2.0).abs() <= 0.2, detail)
}

fn collision_oracle() -> Verdict {
    let scenes = 120;
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut largest = 0;
    for seed in 0..scenes {
        let scene = common::random_scene(seed);
        largest = largest.max(scene.components().iter().map(|c| c.body.mesh().triangle_count()).max().unwrap_or(0));
        if let Some(m) = common::oracle_mismatch(&scene, 1e-6) {
            mismatches.push(format!("scene {seed}: {m}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{scenes} scenes (≤ {largest} triangles/component), {} mismatches, {secs:.1} s{}",
        mismatches.len(),
        mismatches.first().map(|m| format!("; {m}")).unwrap_or_default()
    );
    ensure(mismatches.is_empty() && largest <= 2_000 && secs < 60.0, detail)
}

fn scenario_harness() -> Verdict {
    let geom = fixtures::scenario_geometry().map_err(|e| e.to_string())?;
    let scenarios = synthetic_scenarios(&geom, 2024).map_err(|e| e.to_string())?;
    let report = run_scenarios(&scenarios, &geom);
    let (Some(mean), Some(std)) = (report.mean_difference_mm, report.std_difference_mm) else {
        return Err(format!("no aggregates: {report}"));
    };
    let detail = format!(
        "{} scenarios, {} failures, mean {mean:+.3} mm, std {std:.3} mm",
        scenarios.len(),
        report.failures
    );
    ensure(
        scenarios.len() == 20 && report.failures == 0 && mean.abs() <= 0.5 && (0.3..=0.7).contains(&std),
        detail,
    )
}

fn marching_cubes_sphere() -> Verdict {
    let r = 50.0;
    let spacing = 130.0 / 63.0;
    let vol = ScalarVolume::from_fn([64; 3], Vec3::repeat(spacing), Vec3::repeat(-65.0), |p| p.norm() - r)
        .map_err(|e| e.to_string())?;
    let mesh = marching_cubes(&vol, 0.0).map_err(|e| e.to_string())?;
    let exact = 4.0 * std::f64::consts::PI * r * r;
    let rel = (mesh.area() - exact).abs() / exact;
    let detail = format!(
        "{} triangles, watertight {}, area error {:.3}%",
        mesh.triangle_count(),
        mesh.is_watertight(),
        rel * 100.0
    );
    ensure(mesh.is_watertight() && rel < 0.02, detail)
}

fn x3d_round_trip(patient: Option<&TriMesh>) -> Verdict {
    let geom = fixtures::scenario_geometry().map_err(|e| e.to_string())?;
    let update = JointUpdate {
        gantry_deg: Some(30.0),
        collimator_deg: Some(15.0),
        couch_rotation_deg: Some(10.0),
        couch_translation_mm: Some([5.0, -20.0, 12.5]),
        collimator_gap_mm: None,
    };
    let state = set_joints(&geom.default_state(), &update).map_err(|e| e.to_string())?;
    let posed = forward_kinematics(&geom, &state).map_err(|e| e.to_string())?;
    let doc = x3d::export_scene(&posed, Precision::Exact);
    let shapes = x3d::import(&doc).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (c, s) in posed.components().iter().zip(&shapes) {
        let (a, b) = (c.world_mesh(), s.world_mesh());
        if s.name.as_deref() != Some(c.name.as_str()) || a.vertex_count() != b.vertex_count() || a.triangles() != b.triangles() {
            return Err(format!("component `{}` changed topology", c.name));
        }
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            worst = worst.max((p - q).norm());
        }
    }
    let Some(patient) = patient else {
        return Err(format!("round trip {worst:.2e} mm; no pipeline patient to size"));
    };
    let bytes = x3d::export_mesh(patient, Precision::Significant(6)).len();
    let mb = bytes as f64 / 1e6;
    let detail = format!(
        "round trip {worst:.2e} mm over {} components; {}-triangle patient at 6 digits {mb:.3} MB (band 0.60–1.02 MB)",
        shapes.len(),
        patient.triangle_count()
    );
    ensure(
        shapes.len() == posed.components().len() && worst <= 1e-5 && (0.75 * 0.8..=0.85 * 1.2).contains(&mb),
        detail,
    )
}

fn metrics_and_budget() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let inputs = 100_000;
    let mut violations = 0;
    for _ in 0..inputs {
        let n = rng.random_range(1..40);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let m = metrics(&e).map_err(|e| e.to_string())?;
        let slack = 1e-12 * m.max_mm;
        if !(m.mae_mm <= m.rmse_mm + slack && m.rmse_mm <= m.max_mm + slack) {
            violations += 1;
        }
    }
    let report = |mae: f64, rmse: f64, max: f64| MetricsReport {
        mae_mm: mae,
        rmse_mm: rmse,
        max_mm: max,
        n: 1,
    };
    let mut budget_bad = 0;
    for _ in 0..1_000 {
        let s = report(rng.random_range(0.0..5.0), 0.0, rng.random_range(5.0..20.0));
        let r = report(rng.random_range(0.0..5.0), 0.0, rng.random_range(5.0..20.0));
        let d = rng.random_range(0.0..2.0);
        let b = compose_budget(&s, &r, d);
        let additive = (b.composed_mae_mm - (s.mae_mm + r.mae_mm + d)).abs() < 1e-12
            && (b.composed_max_mm - (s.max_mm + r.max_mm + d)).abs() < 1e-12;
        let bump = rng.random_range(0.0..3.0);
        let grown = [
            compose_budget(&report(s.mae_mm + bump, 0.0, s.max_mm + bump), &r, d),
            compose_budget(&s, &report(r.mae_mm + bump, 0.0, r.max_mm + bump), d),
            compose_budget(&s, &r, d + bump),
        ];
        let monotone = grown
            .iter()
            .all(|g| g.composed_mae_mm >= b.composed_mae_mm && g.composed_max_mm >= b.composed_max_mm);
        if !(additive && monotone) {
            budget_bad += 1;
        }
    }
    let detail = format!("{violations} ordering violations in {inputs} inputs, {budget_bad} budget violations in 1000");
    ensure(violations == 0 && budget_bad == 0, detail)
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &verdict {
        Ok(d) => println!("PASS {name}: {d} [{secs:.1} s]"),
        Err(d) => println!("FAIL {name}: {d} [{secs:.1} s]"),
    }
    verdict.is_ok()
}

fn main() -> ExitCode {
    let mut patient = None;
    let results = [
        run("decimation endpoint", decimation_endpoint),
        run("pipeline budget", || pipeline_budget(&mut patient)),
        run("reconstruction accuracy", reconstruction_accuracy),
        run("flat-surface protocol", flat_surface),
        run("collision oracle equivalence", collision_oracle),
        run("scenario harness self-consistency", scenario_harness),
        run("marching cubes sphere", marching_cubes_sphere),
        run("x3d round trip and size", || x3d_round_trip(patient.as_ref())),
        run("metrics ordering and error budget", metrics_and_budget),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
