//! Scan pipeline, served scene and X3D interchange for the room simulator.

pub mod http;
pub mod pipeline;
pub mod scene;
pub mod x3d;
