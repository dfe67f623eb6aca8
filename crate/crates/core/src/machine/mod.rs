//! Parametric treatment machine: joints with limits, a component tree and
//! forward kinematics.
//!
//! Angle convention (IEC 61217 flavored, fixed here because nothing upstream
//! defines one):
//!
//! * gantry: rotation about +Y through isocenter. At 0° the source sits at
//!   `(0, 0, +SAD)`; positive angles carry it toward +X, so 90° puts it at
//!   `(SAD, 0, 0)`.
//! * collimator: rotation about the beam axis (the gantry frame's Z axis).
//! * couch: rotation about +Z through isocenter, then translation in room
//!   coordinates.

mod definition;
pub mod standin;
mod state;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collide::{CollisionBody, PairKey};
use crate::geometry::{RigidTransform, TriMesh, Vec3};
use crate::{Error, Result};

pub use definition::{export as export_definition, ComponentSpec, MachineDefinition};
pub use state::{set_joints, JointLimits, JointRange, JointUpdate, MachineState};

/// Name under which the patient surface is registered.
pub const PATIENT: &str = "patient";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum MachineKind {
    #[default]
    #[serde(rename = "XRT")]
    Xrt,
    #[serde(rename = "PT")]
    Pt,
}

/// Kinematic frames components can be mounted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Room,
    Gantry,
    Collimator,
    Turntable,
    Tabletop,
}

impl Frame {
    pub fn parse(name: &str) -> Option<Frame> {
        Some(match name {
            "room" => Frame::Room,
            "gantry" => Frame::Gantry,
            "collimator" => Frame::Collimator,
            "turntable" => Frame::Turntable,
            "tabletop" => Frame::Tabletop,
            _ => return None,
        })
    }

    pub fn attachment(self) -> Attachment {
        match self {
            Frame::Room => Attachment::Fixed,
            Frame::Gantry | Frame::Collimator => Attachment::Gantry,
            Frame::Turntable | Frame::Tabletop => Attachment::Couch,
        }
    }

    /// Frame pose in room coordinates.
    pub fn pose(self, state: &MachineState) -> RigidTransform {
        let gantry = RigidTransform::rotation_y_deg(state.gantry_deg());
        let couch_rot = RigidTransform::rotation_z_deg(state.couch_rotation_deg());
        match self {
            Frame::Room => RigidTransform::identity(),
            Frame::Gantry => gantry,
            Frame::Collimator => {
                gantry.compose(&RigidTransform::rotation_z_deg(state.collimator_deg()))
            }
            Frame::Turntable => couch_rot,
            Frame::Tabletop => RigidTransform::from_translation(state.couch_translation_mm())
                .compose(&couch_rot),
        }
    }
}

/// Which kinematic chain moves a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    Fixed,
    Gantry,
    Couch,
}

/// What a component hangs from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parent {
    Frame(Frame),
    Component(String),
}

#[derive(Debug, Clone)]
pub struct Component {
    pub name: String,
    pub body: Arc<CollisionBody>,
    pub parent: Parent,
    /// Pose in the parent's frame.
    pub mount: RigidTransform,
}

/// Named component meshes and their mounting tree.
#[derive(Debug, Clone)]
pub struct MachineGeometry {
    kind: MachineKind,
    sad_mm: f64,
    limits: JointLimits,
    components: Vec<Component>,
    excluded: Vec<PairKey>,
}

impl MachineGeometry {
    /// Validates names, parents and acyclicity.
    pub fn new(
        kind: MachineKind,
        sad_mm: f64,
        limits: JointLimits,
        components: Vec<Component>,
        excluded: Vec<PairKey>,
    ) -> Result<Self> {
        if !(sad_mm.is_finite() && sad_mm > 0.0) {
            return Err(Error::InvalidMachine(format!("SAD must be positive, got {sad_mm}")));
        }
        limits.validate()?;
        let mut seen = HashMap::new();
        for (i, c) in components.iter().enumerate() {
            if c.name.is_empty() || Frame::parse(&c.name).is_some() {
                return Err(Error::InvalidMachine(format!(
                    "`{}` is not a usable component name",
                    c.name
                )));
            }
            if seen.insert(c.name.as_str(), i).is_some() {
                return Err(Error::InvalidMachine(format!("duplicate component `{}`", c.name)));
            }
        }
        let geom = Self {
            kind,
            sad_mm,
            limits,
            components,
            excluded,
        };
        for c in &geom.components {
            geom.chain(&c.name)?;
        }
        Ok(geom)
    }

    /// Procedural stand-in geometry at realistic dimensions.
    pub fn standin(kind: MachineKind) -> Self {
        standin::build(kind)
    }

    pub fn kind(&self) -> MachineKind {
        self.kind
    }

    pub fn sad_mm(&self) -> f64 {
        self.sad_mm
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn patient(&self) -> Option<&Component> {
        self.component(PATIENT)
    }

    pub fn triangle_count(&self) -> usize {
        self.components.iter().map(|c| c.body.mesh().triangle_count()).sum()
    }

    /// Configured exclusions plus every component/parent-component pair.
    pub fn excluded_pairs(&self) -> Vec<PairKey> {
        let mut out = self.excluded.clone();
        for c in &self.components {
            if let Parent::Component(p) = &c.parent {
                out.push(PairKey::new(&c.name, p));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn default_state(&self) -> MachineState {
        MachineState::new(self.kind, self.limits)
    }

    /// Component names from `name` up to its root frame.
    fn chain(&self, name: &str) -> Result<(Frame, Vec<usize>)> {
        let mut path = Vec::new();
        let mut current = name;
        loop {
            let idx = self
                .components
                .iter()
                .position(|c| c.name == current)
                .ok_or_else(|| Error::UnknownComponent(current.to_string()))?;
            if path.contains(&idx) || path.len() > self.components.len() {
                return Err(Error::InvalidMachine(format!("mount cycle through `{current}`")));
            }
            path.push(idx);
            match &self.components[idx].parent {
                Parent::Frame(f) => return Ok((*f, path)),
                Parent::Component(p) => current = p,
            }
        }
    }

    /// Registers `patient` on the couch-top frame, replacing any previous
    /// patient. With an identity offset, patient coordinates are room
    /// coordinates at zero couch travel.
    pub fn attach_patient(&self, patient: TriMesh, couch_offset: RigidTransform) -> Result<MachineGeometry> {
        let body = CollisionBody::new(patient)?;
        Ok(self.attach_patient_body(body, couch_offset))
    }

    /// As [`attach_patient`](Self::attach_patient) with a prebuilt body.
    pub fn attach_patient_body(&self, body: Arc<CollisionBody>, couch_offset: RigidTransform) -> MachineGeometry {
        let mut geom = self.clone();
        geom.components.retain(|c| c.name != PATIENT);
        geom.components.push(Component {
            name: PATIENT.to_string(),
            body,
            parent: Parent::Frame(Frame::Tabletop),
            mount: couch_offset,
        });
        // The patient lies on the couch top by construction.
        if geom.component(standin::COUCH_TOP).is_some() {
            let key = PairKey::new(PATIENT, standin::COUCH_TOP);
            if !geom.excluded.contains(&key) {
                geom.excluded.push(key);
            }
        }
        geom
    }
}

/// A component placed in the room.
#[derive(Debug, Clone)]
pub struct PosedComponent {
    pub name: String,
    pub body: Arc<CollisionBody>,
    /// Component mesh coordinates → room coordinates.
    pub pose: RigidTransform,
    pub attachment: Attachment,
}

impl PosedComponent {
    pub fn world_mesh(&self) -> TriMesh {
        self.body.mesh().transformed(&self.pose)
    }
}

/// Output of forward kinematics.
#[derive(Debug, Clone)]
pub struct PosedScene {
    components: Vec<PosedComponent>,
    excluded: Vec<PairKey>,
    source_mm: Vec3,
}

impl PosedScene {
    pub fn new(components: Vec<PosedComponent>, excluded: Vec<PairKey>) -> Self {
        Self {
            components,
            excluded,
            source_mm: Vec3::zeros(),
        }
    }

    pub fn components(&self) -> &[PosedComponent] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&PosedComponent> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn patient(&self) -> Option<&PosedComponent> {
        self.component(PATIENT)
    }

    pub fn is_excluded(&self, key: &PairKey) -> bool {
        self.excluded.contains(key)
    }

    pub fn excluded_pairs(&self) -> &[PairKey] {
        &self.excluded
    }

    /// Radiation source position in room coordinates.
    pub fn source_mm(&self) -> Vec3 {
        self.source_mm
    }

    pub fn members(&self, attachment: Attachment) -> impl Iterator<Item = &PosedComponent> {
        self.components.iter().filter(move |c| c.attachment == attachment)
    }

    pub fn triangle_count(&self) -> usize {
        self.components.iter().map(|c| c.body.mesh().triangle_count()).sum()
    }
}

/// Places every component for `state`.
///
/// Limits are enforced when states are built; a state built against other
/// limits than the geometry's is rechecked here.
pub fn forward_kinematics(geom: &MachineGeometry, state: &MachineState) -> Result<PosedScene> {
    if state.limits() != geom.limits() {
        state.check_against(geom.limits())?;
    }
    let mut components = Vec::with_capacity(geom.components.len());
    for c in &geom.components {
        let (frame, path) = geom.chain(&c.name)?;
        let mut pose = frame.pose(state);
        for &idx in path.iter().rev() {
            pose = pose.compose(&geom.components[idx].mount);
        }
        components.push(PosedComponent {
            name: c.name.clone(),
            body: c.body.clone(),
            pose,
            attachment: frame.attachment(),
        });
    }
    let source_mm = Frame::Gantry
        .pose(state)
        .apply_point(&Vec3::new(0.0, 0.0, geom.sad_mm));
    Ok(PosedScene {
        components,
        excluded: geom.excluded_pairs(),
        source_mm,
    })
}

pub use standin::{COLLIMATOR_HOUSING, COUCH_BASE, COUCH_TOP, GANTRY_ARM, GANTRY_HEAD, HEAD_FIXATION};
