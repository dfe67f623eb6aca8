//! Clearance scenarios: a joint setting, a component pair and a clearance
//! measured on the physical machine, compared against the simulation.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collide::{check_collision, PairKey};
use crate::machine::{forward_kinematics, set_joints, standin, JointUpdate, MachineGeometry, PATIENT};
use crate::{Error, Result};

/// Measurement noise of the synthetic fixture, mm.
pub const SYNTHETIC_NOISE_MM: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJoints {
    #[serde(default)]
    pub gantry_deg: f64,
    #[serde(default)]
    pub collimator_deg: f64,
    #[serde(default)]
    pub couch_rotation_deg: f64,
    #[serde(default)]
    pub couch_translation_mm: [f64; 3],
}

impl ScenarioJoints {
    fn update(&self) -> JointUpdate {
        JointUpdate {
            gantry_deg: Some(self.gantry_deg),
            collimator_deg: Some(self.collimator_deg),
            couch_rotation_deg: Some(self.couch_rotation_deg),
            couch_translation_mm: Some(self.couch_translation_mm),
            collimator_gap_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub joints: ScenarioJoints,
    pub pair: [String; 2],
    pub measured_clearance_mm: f64,
}

pub fn read_scenarios(json: &str) -> Result<Vec<Scenario>> {
    let list: Vec<Scenario> = serde_json::from_str(json)?;
    for s in &list {
        if !(s.measured_clearance_mm.is_finite() && s.measured_clearance_mm >= 0.0) {
            return Err(Error::format(
                "scenario",
                format!("`{}` has measured clearance {}", s.id, s.measured_clearance_mm),
            ));
        }
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub id: String,
    pub pair: [String; 2],
    pub measured_mm: f64,
    pub simulated_mm: Option<f64>,
    /// simulated − measured.
    pub difference_mm: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub rows: Vec<ScenarioRow>,
    pub mean_difference_mm: Option<f64>,
    /// Sample standard deviation (n − 1) of the differences.
    pub std_difference_mm: Option<f64>,
    pub failures: usize,
}

impl ScenarioReport {
    fn from_rows(rows: Vec<ScenarioRow>) -> Self {
        let diffs: Vec<f64> = rows.iter().filter_map(|r| r.difference_mm).collect();
        let n = diffs.len() as f64;
        let mean = (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / n);
        let std = mean.filter(|_| diffs.len() > 1).map(|m| {
            (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        let failures = rows.iter().filter(|r| r.error.is_some()).count();
        Self {
            rows,
            mean_difference_mm: mean,
            std_difference_mm: std,
            failures,
        }
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:<40} {:>10} {:>10} {:>8}", "id", "pair", "measured", "simulated", "diff")?;
        for r in &self.rows {
            let pair = format!("{} / {}", r.pair[0], r.pair[1]);
            match (&r.simulated_mm, &r.difference_mm, &r.error) {
                (Some(s), Some(d), _) => writeln!(
                    f,
                    "{:<8} {:<40} {:>10.2} {:>10.2} {:>+8.2}",
                    r.id, pair, r.measured_mm, s, d
                )?,
                (_, _, err) => writeln!(
                    f,
                    "{:<8} {:<40} {:>10.2} failed: {}",
                    r.id,
                    pair,
                    r.measured_mm,
                    err.as_deref().unwrap_or("unknown")
                )?,
            }
        }
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3} mm"));
        writeln!(f, "mean difference {}", show(self.mean_difference_mm))?;
        write!(f, "std of differences {}", show(self.std_difference_mm))
    }
}

fn simulate(geom: &MachineGeometry, s: &Scenario) -> Result<f64> {
    let state = set_joints(&geom.default_state(), &s.joints.update())?;
    let scene = forward_kinematics(geom, &state)?;
    for name in &s.pair {
        if scene.component(name).is_none() {
            return Err(Error::UnknownComponent(name.clone()));
        }
    }
    let filter = [PairKey::new(&s.pair[0], &s.pair[1])];
    Ok(check_collision(&scene, Some(&filter)).min_clearance_mm)
}

/// Simulates every scenario independently; rows keep the input order.
pub fn run_scenarios(scenarios: &[Scenario], geom: &MachineGeometry) -> ScenarioReport {
    let rows = scenarios
        .par_iter()
        .map(|s| {
            let (simulated, error) = match simulate(geom, s) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ScenarioRow {
                id: s.id.clone(),
                pair: s.pair.clone(),
                measured_mm: s.measured_clearance_mm,
                simulated_mm: simulated,
                difference_mm: simulated.map(|c| c - s.measured_clearance_mm),
                error,
            }
        })
        .collect();
    ScenarioReport::from_rows(rows)
}

/// Twenty near-collision scenarios built against `geom` (which must carry a
/// patient). Each one raises the couch until the named pair sits at a chosen
/// clearance; "measured" values are the simulated clearance plus
/// N(0, 0.5 mm) noise. Two scenarios are driven into contact and measured
/// as 0.
pub fn synthetic_scenarios(geom: &MachineGeometry, seed: u64) -> Result<Vec<Scenario>> {
    if geom.patient().is_none() {
        return Err(Error::UnknownComponent(PATIENT.into()));
    }
    let pairs = [
        (standin::COLLIMATOR_HOUSING, standin::COUCH_TOP),
        (standin::COLLIMATOR_HOUSING, PATIENT),
        (standin::COLLIMATOR_HOUSING, standin::HEAD_FIXATION),
        (standin::GANTRY_HEAD, PATIENT),
    ];
    let gantries = [0.0, 15.0, -20.0, 30.0, -35.0, 45.0, -10.0, 25.0, -45.0, 40.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SYNTHETIC_NOISE_MM).expect("positive sigma");
    let limits = *geom.limits();
    let (lo, hi) = (limits.couch_vertical_mm.min, limits.couch_vertical_mm.max);

    let mut out = Vec::new();
    let mut attempt = 0usize;
    while out.len() < 20 {
        if attempt > 400 {
            return Err(Error::InvalidMachine("geometry admits too few near-collision setups".into()));
        }
        let (a, b) = pairs[attempt % pairs.len()];
        let gantry = gantries[(attempt / pairs.len()) % gantries.len()];
        let couch_rot = [0.0, 10.0, -15.0][(attempt / 7) % 3];
        let lateral = [0.0, 40.0, -60.0][(attempt / 5) % 3];
        let longitudinal = if b == standin::COUCH_TOP { -300.0 } else { 0.0 };
        attempt += 1;
        let colliding = out.len() % 10 == 9;
        let target = if colliding { 0.0 } else { 2.0 + (out.len() % 10) as f64 * 4.0 };
        let joints = |z: f64| ScenarioJoints {
            gantry_deg: gantry,
            collimator_deg: 0.0,
            couch_rotation_deg: couch_rot,
            couch_translation_mm: [lateral, longitudinal, z],
        };
        let clearance = |z: f64| {
            simulate(
                geom,
                &Scenario {
                    id: String::new(),
                    joints: joints(z),
                    pair: [a.into(), b.into()],
                    measured_clearance_mm: 0.0,
                },
            )
        };
        let (c_lo, c_hi) = (clearance(lo)?, clearance(hi)?);
        if !(c_lo > target + 1.0 && c_hi < target.max(0.5)) {
            continue;
        }
        // Bisect on couch height for the target clearance (or first contact).
        let (mut down, mut up) = (lo, hi);
        for _ in 0..40 {
            let mid = 0.5 * (down + up);
            let c = clearance(mid)?;
            if c > target.max(0.25) {
                down = mid;
            } else {
                up = mid;
            }
        }
        let z = if colliding { (up + 3.0).min(hi) } else { up };
        let sim = clearance(z)?;
        if colliding && sim > 0.0 {
            continue;
        }
        let measured = if colliding {
            0.0
        } else {
            (sim + noise.sample(&mut rng)).max(0.0)
        };
        out.push(Scenario {
            id: format!("S{:02}", out.len() + 1),
            joints: joints(z),
            pair: [a.into(), b.into()],
            measured_clearance_mm: measured,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_shape() {
        let text = r#"[{"id":"A","joints":{"gantry_deg":10,"couch_translation_mm":[0,0,50]},
                        "pair":["collimator_housing","couch_top"],"measured_clearance_mm":12.5}]"#;
        let s = read_scenarios(text).unwrap();
        assert_eq!(s[0].joints.gantry_deg, 10.0);
        assert_eq!(s[0].joints.collimator_deg, 0.0);
        let neg = text.replace("12.5", "-1");
        assert!(read_scenarios(&neg).is_err());
    }

    #[test]
    fn unknown_names_fail_only_their_row() {
        let geom = MachineGeometry::standin(crate::machine::MachineKind::Xrt);
        let good = Scenario {
            id: "ok".into(),
            joints: ScenarioJoints::default(),
            pair: [standin::COLLIMATOR_HOUSING.into(), standin::COUCH_TOP.into()],
            measured_clearance_mm: 500.0,
        };
        let bad = Scenario {
            id: "bad".into(),
            pair: [standin::COLLIMATOR_HOUSING.into(), "wheelchair".into()],
            ..good.clone()
        };
        let out_of_range = Scenario {
            id: "limit".into(),
            joints: ScenarioJoints { gantry_deg: 400.0, ..Default::default() },
            ..good.clone()
        };
        let r = run_scenarios(&[good, bad, out_of_range], &geom);
        assert_eq!(r.failures, 2);
        assert!(r.rows[0].simulated_mm.is_some());
        assert!(r.rows[1].error.as_deref().unwrap().contains("wheelchair"));
        assert!(r.rows[2].error.is_some());
        assert_eq!(r.mean_difference_mm, r.rows[0].difference_mm);
        assert_eq!(r.std_difference_mm, None);
    }
}
