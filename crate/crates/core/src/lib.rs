//! Radiotherapy treatment-room simulation.
//!
//! The crate covers the path from patient surface capture to collision
//! warnings:
//!
//! * [`scan`] synthesizes depth frames from a calibrated multi-camera rig and
//!   merges them into a world-space point cloud.
//! * [`surface`] turns point clouds and scalar volumes into triangle meshes,
//!   decimates them and scores them against the scan.
//! * [`machine`] poses a parametric gantry/collimator/couch model.
//! * [`collide`] finds intersecting components and minimum clearances.
//! * [`evalkit`] holds the accuracy assessment harness.
//!
//! All world-space quantities are millimeters in a right-handed frame with
//! +Z up, +Y along the couch toward the gantry and the origin at isocenter.

pub mod collide;
pub mod error;
pub mod evalkit;
pub mod fixtures;
pub mod geometry;
pub mod machine;
pub mod ply;
pub mod scan;
pub mod surface;

pub use error::{Error, Result};
pub use geometry::{Aabb, PointCloud, RigidTransform, TriMesh, Vec3};
