//! The served scene: one writer, snapshot readers, revision-stamped
//! collision reports.

use std::sync::{Arc, Mutex, RwLock};

use roomsim::collide::{check_collision, clearance_sweep, CollisionBody, CollisionReport, Status};
use roomsim::machine::{
    forward_kinematics, set_joints, Attachment, JointLimits, JointUpdate, MachineGeometry, MachineKind, MachineState,
    Parent, PosedScene,
};
use roomsim::{RigidTransform, TriMesh};
use serde::Serialize;
use tokio::sync::broadcast;

/// Where the patient came from and how it sits on the couch top.
#[derive(Debug, Clone, Serialize)]
pub struct PatientInfo {
    pub source: String,
    pub triangles: usize,
    pub couch_offset: RigidTransform,
}

/// One consistent view of the scene. Every field belongs to `revision`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub revision: u64,
    pub machine_ref: String,
    pub geometry: Arc<MachineGeometry>,
    pub state: MachineState,
    pub patient: Option<PatientInfo>,
    pub posed: Arc<PosedScene>,
    pub report: Arc<CollisionReport>,
}

/// Pushed to event-stream subscribers after every accepted mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SceneEvent {
    pub revision: u64,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub name: String,
    pub parent: String,
    pub attachment: Attachment,
    pub triangles: usize,
    /// Mesh coordinates → room coordinates at this revision.
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, Serialize)]
pub struct MachineSummary {
    #[serde(rename = "ref")]
    pub reference: String,
    pub kind: MachineKind,
    pub sad_mm: f64,
    pub limits: JointLimits,
}

/// The scene document as served at `GET /api/scene`.
#[derive(Debug, Clone, Serialize)]
pub struct SceneSummary {
    pub revision: u64,
    pub machine: MachineSummary,
    pub joints: JointUpdate,
    pub source_mm: [f64; 3],
    pub components: Vec<ComponentSummary>,
    pub patient: Option<PatientInfo>,
    pub collision: CollisionReport,
}

impl Snapshot {
    fn build(
        revision: u64,
        machine_ref: String,
        geometry: Arc<MachineGeometry>,
        state: MachineState,
        patient: Option<PatientInfo>,
    ) -> roomsim::Result<Self> {
        let posed = forward_kinematics(&geometry, &state)?;
        let report = check_collision(&posed, None);
        Ok(Self {
            revision,
            machine_ref,
            geometry,
            state,
            patient,
            posed: Arc::new(posed),
            report: Arc::new(report),
        })
    }

    pub fn event(&self) -> SceneEvent {
        SceneEvent {
            revision: self.revision,
            status: self.report.status,
        }
    }

    pub fn summary(&self) -> SceneSummary {
        let components = self
            .posed
            .components()
            .iter()
            .map(|c| {
                let parent = match self.geometry.component(&c.name).map(|g| &g.parent) {
                    Some(Parent::Frame(f)) => serde_json::to_value(f)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    Some(Parent::Component(p)) => p.clone(),
                    None => String::new(),
                };
                ComponentSummary {
                    name: c.name.clone(),
                    parent,
                    attachment: c.attachment,
                    triangles: c.body.mesh().triangle_count(),
                    pose: c.pose,
                }
            })
            .collect();
        let s = self.posed.source_mm();
        SceneSummary {
            revision: self.revision,
            machine: MachineSummary {
                reference: self.machine_ref.clone(),
                kind: self.geometry.kind(),
                sad_mm: self.geometry.sad_mm(),
                limits: *self.geometry.limits(),
            },
            joints: self.state.joints(),
            source_mm: [s.x, s.y, s.z],
            components,
            patient: self.patient.clone(),
            collision: (*self.report).clone(),
        }
    }
}

/// Serializes mutations and hands out immutable snapshots.
pub struct SceneStore {
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    events: broadcast::Sender<SceneEvent>,
}

impl SceneStore {
    /// Revision 0 at the machine's default pose.
    pub fn new(geometry: MachineGeometry, machine_ref: impl Into<String>, patient: Option<PatientInfo>) -> roomsim::Result<Self> {
        let state = geometry.default_state();
        let snap = Snapshot::build(0, machine_ref.into(), Arc::new(geometry), state, patient)?;
        let (events, _) = broadcast::channel(64);
        Ok(Self {
            current: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(()),
            events,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("scene lock poisoned").clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<SceneEvent> {
        self.events.subscribe()
    }

    fn commit(&self, next: impl FnOnce(&Snapshot) -> roomsim::Result<Snapshot>) -> roomsim::Result<Arc<Snapshot>> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let base = self.snapshot();
        let snap = Arc::new(next(&base)?);
        *self.current.write().expect("scene lock poisoned") = snap.clone();
        let _ = self.events.send(snap.event());
        Ok(snap)
    }

    /// Applies a partial joint map. Rejected updates change nothing.
    pub fn set_joints(&self, update: &JointUpdate) -> roomsim::Result<Arc<Snapshot>> {
        self.commit(|base| {
            let state = set_joints(&base.state, update)?;
            Snapshot::build(
                base.revision + 1,
                base.machine_ref.clone(),
                base.geometry.clone(),
                state,
                base.patient.clone(),
            )
        })
    }

    /// Replaces the patient surface.
    pub fn attach_patient(&self, mesh: TriMesh, couch_offset: RigidTransform, source: impl Into<String>) -> roomsim::Result<Arc<Snapshot>> {
        let triangles = mesh.triangle_count();
        let body = CollisionBody::new(mesh)?;
        let source = source.into();
        self.commit(|base| {
            let geometry = base.geometry.attach_patient_body(body, couch_offset);
            let info = PatientInfo {
                source,
                triangles,
                couch_offset,
            };
            Snapshot::build(
                base.revision + 1,
                base.machine_ref.clone(),
                Arc::new(geometry),
                base.state.clone(),
                Some(info),
            )
        })
    }

    /// Evaluates each update against the current state without committing.
    pub fn sweep(&self, updates: &[JointUpdate]) -> Vec<roomsim::Result<(MachineState, CollisionReport)>> {
        let base = self.snapshot();
        let states: Vec<_> = updates.iter().map(|u| set_joints(&base.state, u)).collect();
        let valid: Vec<MachineState> = states.iter().filter_map(|s| s.as_ref().ok().cloned()).collect();
        let mut swept = clearance_sweep(&base.geometry, &valid, None).into_iter();
        states
            .into_iter()
            .map(|s| {
                s?;
                let entry = swept.next().expect("one entry per valid state");
                entry.outcome.map(|r| (entry.state, r))
            })
            .collect()
    }
}
