//! Mesh production: marching cubes over scalar volumes, reconstruction from
//! oriented point clouds, quadric decimation and quality filtering.

mod decimate;
mod mc;
mod mc_table;
mod quality;
mod recon;
mod volume;

pub use decimate::{decimate, Decimated, DecimationParams, RoundLog};
pub use mc::marching_cubes;
pub use quality::{
    filter_by_cutoff, filter_by_quality, Filtered, QualityBin, QualityMap, DEFAULT_FILTER_K, DEFAULT_THRESHOLDS_MM,
};
pub use recon::{estimate_normals, reconstruct, ReconGrid, ReconParams, MIN_POINTS};
pub(crate) use mc::Polygonizer;
pub use volume::{read_volume, write_volume, SampleType, ScalarVolume, VolumeHeader};
