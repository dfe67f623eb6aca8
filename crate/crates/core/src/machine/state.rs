use serde::{Deserialize, Serialize};

use super::MachineKind;
use crate::geometry::Vec3;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

impl JointRange {
    pub const fn new(min: f64, max: f64, default: f64) -> Self {
        Self { min, max, default }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v >= self.min && v <= self.max
    }

    fn check(&self, joint: &str, value: f64) -> Result<()> {
        if self.contains(value) {
            Ok(())
        } else {
            Err(Error::LimitViolation {
                joint: joint.to_string(),
                value,
                min: self.min,
                max: self.max,
            })
        }
    }
}

/// Per-joint travel. The defaults are representative stand-ins, not data
/// for any particular machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointLimits {
    pub gantry_deg: JointRange,
    pub collimator_deg: JointRange,
    pub couch_rotation_deg: JointRange,
    pub couch_lateral_mm: JointRange,
    pub couch_longitudinal_mm: JointRange,
    pub couch_vertical_mm: JointRange,
    pub gap_x_mm: JointRange,
    pub gap_y_mm: JointRange,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            gantry_deg: JointRange::new(-185.0, 185.0, 0.0),
            collimator_deg: JointRange::new(-180.0, 180.0, 0.0),
            couch_rotation_deg: JointRange::new(-95.0, 95.0, 0.0),
            couch_lateral_mm: JointRange::new(-500.0, 500.0, 0.0),
            couch_longitudinal_mm: JointRange::new(-1000.0, 1000.0, 0.0),
            couch_vertical_mm: JointRange::new(-200.0, 500.0, 0.0),
            gap_x_mm: JointRange::new(5.0, 400.0, 200.0),
            gap_y_mm: JointRange::new(5.0, 400.0, 200.0),
        }
    }
}

impl JointLimits {
    fn named(&self) -> [(&'static str, &JointRange); 8] {
        [
            ("gantry_deg", &self.gantry_deg),
            ("collimator_deg", &self.collimator_deg),
            ("couch_rotation_deg", &self.couch_rotation_deg),
            ("couch_lateral_mm", &self.couch_lateral_mm),
            ("couch_longitudinal_mm", &self.couch_longitudinal_mm),
            ("couch_vertical_mm", &self.couch_vertical_mm),
            ("gap_x_mm", &self.gap_x_mm),
            ("gap_y_mm", &self.gap_y_mm),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in self.named() {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                return Err(Error::InvalidMachine(format!("joint `{name}` has an empty range")));
            }
            if !r.contains(r.default) {
                return Err(Error::InvalidMachine(format!(
                    "joint `{name}` default {} outside [{}, {}]",
                    r.default, r.min, r.max
                )));
            }
        }
        if self.gap_x_mm.min <= 0.0 || self.gap_y_mm.min <= 0.0 {
            return Err(Error::InvalidMachine("collimator gap must stay positive".into()));
        }
        Ok(())
    }
}

/// Joint values. Only constructible within limits.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    kind: MachineKind,
    limits: JointLimits,
    gantry_deg: f64,
    collimator_deg: f64,
    couch_rotation_deg: f64,
    couch_translation_mm: Vec3,
    collimator_gap_mm: [f64; 2],
}

impl MachineState {
    /// Every joint at its default.
    pub fn new(kind: MachineKind, limits: JointLimits) -> Self {
        Self {
            kind,
            limits,
            gantry_deg: limits.gantry_deg.default,
            collimator_deg: limits.collimator_deg.default,
            couch_rotation_deg: limits.couch_rotation_deg.default,
            couch_translation_mm: Vec3::new(
                limits.couch_lateral_mm.default,
                limits.couch_longitudinal_mm.default,
                limits.couch_vertical_mm.default,
            ),
            collimator_gap_mm: [limits.gap_x_mm.default, limits.gap_y_mm.default],
        }
    }

    pub fn kind(&self) -> MachineKind {
        self.kind
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    pub fn gantry_deg(&self) -> f64 {
        self.gantry_deg
    }

    pub fn collimator_deg(&self) -> f64 {
        self.collimator_deg
    }

    pub fn couch_rotation_deg(&self) -> f64 {
        self.couch_rotation_deg
    }

    pub fn couch_translation_mm(&self) -> Vec3 {
        self.couch_translation_mm
    }

    pub fn collimator_gap_mm(&self) -> [f64; 2] {
        self.collimator_gap_mm
    }

    /// Checks the current values against another set of limits.
    pub fn check_against(&self, limits: &JointLimits) -> Result<()> {
        let t = self.couch_translation_mm;
        limits.gantry_deg.check("gantry_deg", self.gantry_deg)?;
        limits.collimator_deg.check("collimator_deg", self.collimator_deg)?;
        limits.couch_rotation_deg.check("couch_rotation_deg", self.couch_rotation_deg)?;
        limits.couch_lateral_mm.check("couch_lateral_mm", t.x)?;
        limits.couch_longitudinal_mm.check("couch_longitudinal_mm", t.y)?;
        limits.couch_vertical_mm.check("couch_vertical_mm", t.z)?;
        limits.gap_x_mm.check("gap_x_mm", self.collimator_gap_mm[0])?;
        limits.gap_y_mm.check("gap_y_mm", self.collimator_gap_mm[1])?;
        Ok(())
    }

    pub fn joints(&self) -> JointUpdate {
        let t = self.couch_translation_mm;
        JointUpdate {
            gantry_deg: Some(self.gantry_deg),
            collimator_deg: Some(self.collimator_deg),
            couch_rotation_deg: Some(self.couch_rotation_deg),
            couch_translation_mm: Some([t.x, t.y, t.z]),
            collimator_gap_mm: Some(self.collimator_gap_mm),
        }
    }
}

/// Partial joint map; absent joints keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gantry_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collimator_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couch_rotation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couch_translation_mm: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collimator_gap_mm: Option<[f64; 2]>,
}

/// Applies `updates`, rejecting the first joint that leaves its interval.
pub fn set_joints(state: &MachineState, updates: &JointUpdate) -> Result<MachineState> {
    let mut next = state.clone();
    if let Some(v) = updates.gantry_deg {
        next.gantry_deg = v;
    }
    if let Some(v) = updates.collimator_deg {
        next.collimator_deg = v;
    }
    if let Some(v) = updates.couch_rotation_deg {
        next.couch_rotation_deg = v;
    }
    if let Some([x, y, z]) = updates.couch_translation_mm {
        next.couch_translation_mm = Vec3::new(x, y, z);
    }
    if let Some(g) = updates.collimator_gap_mm {
        next.collimator_gap_mm = g;
    }
    next.check_against(&state.limits)?;
    Ok(next)
}
