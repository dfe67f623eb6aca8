//! Machine definition files.
//!
//! ```json
//! {
//!   "kind": "XRT",
//!   "sad_mm": 1000,
//!   "joints": { "gantry_deg": { "min": -185, "max": 185, "default": 0 } },
//!   "components": [
//!     { "name": "gantry_arm", "mesh": "arm.ply", "parent": "gantry",
//!       "mount": { "rotation": [1,0,0, 0,1,0, 0,0,1], "translation_mm": [0, 1075, 1000] } }
//!   ],
//!   "excluded_pairs": [["collimator_housing", "gantry_head"]]
//! }
//! ```
//!
//! `parent` names a frame (`room`, `gantry`, `collimator`, `turntable`,
//! `tabletop`) or another component. Mesh paths are relative to the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Component, Frame, JointLimits, MachineGeometry, MachineKind, Parent};
use crate::collide::{CollisionBody, PairKey};
use crate::geometry::RigidTransform;
use crate::{ply, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    pub mesh: String,
    pub parent: String,
    #[serde(default)]
    pub mount: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDefinition {
    pub kind: MachineKind,
    #[serde(default = "default_sad")]
    pub sad_mm: f64,
    #[serde(default)]
    pub joints: JointLimits,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub excluded_pairs: Vec<[String; 2]>,
}

fn default_sad() -> f64 {
    1000.0
}

impl MachineDefinition {
    /// Parses and checks everything except the mesh files.
    pub fn parse(json: &str) -> Result<MachineDefinition> {
        let def: MachineDefinition = serde_json::from_str(json)?;
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sad_mm.is_finite() && self.sad_mm > 0.0) {
            return Err(Error::InvalidMachine(format!("SAD must be positive, got {}", self.sad_mm)));
        }
        self.joints.validate()?;
        for c in &self.components {
            let is_frame = Frame::parse(&c.parent).is_some();
            let is_component = self.components.iter().any(|o| o.name == c.parent);
            if !is_frame && !is_component {
                return Err(Error::InvalidMachine(format!(
                    "component `{}` has unknown parent `{}`",
                    c.name, c.parent
                )));
            }
        }
        for [a, b] in &self.excluded_pairs {
            for n in [a, b] {
                if !self.components.iter().any(|c| &c.name == n) {
                    return Err(Error::UnknownComponent(n.clone()));
                }
            }
        }
        Ok(())
    }

    /// Loads component meshes relative to `base_dir` and builds the geometry.
    pub fn into_geometry(self, base_dir: &Path) -> Result<MachineGeometry> {
        self.validate()?;
        let mut components = Vec::with_capacity(self.components.len());
        for c in self.components {
            let mesh = ply::read_mesh(base_dir.join(&c.mesh))?;
            let parent = match Frame::parse(&c.parent) {
                Some(f) => Parent::Frame(f),
                None => Parent::Component(c.parent.clone()),
            };
            components.push(Component {
                name: c.name,
                body: CollisionBody::new(mesh)?,
                parent,
                mount: c.mount,
            });
        }
        let excluded = self
            .excluded_pairs
            .iter()
            .map(|[a, b]| PairKey::new(a, b))
            .collect();
        MachineGeometry::new(self.kind, self.sad_mm, self.joints, components, excluded)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MachineGeometry> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        MachineDefinition::parse(&text)?.into_geometry(base)
    }
}

/// Writes `geom` as a definition file plus one PLY per component into `dir`.
pub fn export(geom: &MachineGeometry, dir: &Path) -> Result<MachineDefinition> {
    std::fs::create_dir_all(dir)?;
    let mut components = Vec::new();
    for c in geom.components() {
        let file = format!("{}.ply", c.name);
        ply::save_mesh(dir.join(&file), c.body.mesh(), ply::Encoding::BinaryLittleEndian)?;
        let parent = match &c.parent {
            Parent::Frame(f) => serde_json::to_value(f)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            Parent::Component(p) => p.clone(),
        };
        components.push(ComponentSpec {
            name: c.name.clone(),
            mesh: file,
            parent,
            mount: c.mount,
        });
    }
    let def = MachineDefinition {
        kind: geom.kind(),
        sad_mm: geom.sad_mm(),
        joints: *geom.limits(),
        components,
        excluded_pairs: geom
            .excluded
            .iter()
            .map(|k| {
                let (a, b) = k.names();
                [a.to_string(), b.to_string()]
            })
            .collect(),
    };
    std::fs::write(dir.join("machine.json"), serde_json::to_string_pretty(&def)?)?;
    Ok(def)
}
