use std::io;

use crate::geometry::TriMesh;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("calibration degenerate: {0}")]
    CalibrationDegenerate(String),

    #[error("scan is empty after table slicing at z = {z_cut} mm")]
    EmptyScan { z_cut: f64 },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    /// Decimation stopped above the requested triangle count because the
    /// remaining edges are locked. The best mesh reached is carried along.
    #[error("decimation stalled at {achieved} triangles (target {target})")]
    DecimationStalled {
        achieved: usize,
        target: usize,
        rounds: usize,
        mesh: Box<TriMesh>,
    },

    #[error("quality filter removed every vertex (cutoff {cutoff_mm} mm)")]
    FilteredEverything { cutoff_mm: f64 },

    #[error("joint `{joint}` value {value} outside [{min}, {max}]")]
    LimitViolation {
        joint: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown component `{0}`")]
    UnknownComponent(String),

    #[error("invalid machine definition: {0}")]
    InvalidMachine(String),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
