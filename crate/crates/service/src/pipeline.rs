//! End-to-end scan processing: frames → cloud → mesh → decimated mesh →
//! quality-filtered patient surface, with per-stage timings and artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use roomsim::evalkit::MetricsReport;
use roomsim::fixtures;
use roomsim::ply::{self, Encoding};
use roomsim::scan::{
    merge_scans, read_frame, read_rig, render_rig, write_frame, write_rig, CameraIntrinsics, CameraPose, DepthFrame,
    NoiseModel, TableSliceParams,
};
use roomsim::surface::{
    decimate, filter_by_quality, reconstruct, DecimationParams, QualityMap, ReconParams, DEFAULT_FILTER_K,
};
use roomsim::{Error, TriMesh};
use serde::{Deserialize, Serialize};

/// Largest default output size; the default target is a tenth of the
/// reconstruction, capped here.
pub const MAX_DEFAULT_TRIANGLES: usize = 15_999;

/// Where the depth frames come from.
#[derive(Debug, Clone)]
pub enum ScanSource {
    /// Render the bundled mannequin scene with the bundled 4-camera rig.
    Synthetic,
    /// A rig file and a directory holding `<camera_id>.dpf` frames.
    Recorded { rig: PathBuf, frames: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub seed: u64,
    pub grid_resolution: usize,
    pub target_triangles: Option<usize>,
    pub z_cut_mm: f64,
    pub noise: NoiseModel,
    pub filter_k: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            seed: 1,
            grid_resolution: ReconParams::default().grid_resolution,
            target_triangles: None,
            z_cut_mm: fixtures::SCAN_Z_CUT_MM,
            noise: NoiseModel::default(),
            filter_k: DEFAULT_FILTER_K,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub render_ms: f64,
    pub merge_ms: f64,
    pub reconstruct_ms: f64,
    pub decimate_ms: f64,
    pub quality_ms: f64,
}

impl StageTimings {
    pub fn sum(&self) -> f64 {
        self.render_ms + self.merge_ms + self.reconstruct_ms + self.decimate_ms + self.quality_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub stages: StageTimings,
    pub total_ms: f64,
    pub seed: u64,
    pub cloud_points: usize,
    pub reconstructed_triangles: usize,
    pub decimation_rounds: usize,
    pub decimated_triangles: usize,
    pub output_triangles: usize,
    pub quality: MetricsReport,
    pub cutoff_mm: f64,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mesh: TriMesh,
    pub quality: QualityMap,
    pub run: PipelineRun,
}

/// A stage failed; artifacts written before it are listed.
#[derive(Debug, thiserror::Error)]
#[error("pipeline stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
    pub artifacts: Vec<PathBuf>,
}

struct Run<'a> {
    dir: &'a Path,
    artifacts: Vec<PathBuf>,
    clock: Instant,
}

impl Run<'_> {
    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> roomsim::Result<T>) -> Result<(T, f64), PipelineError> {
        let out = f(self).map_err(|source| PipelineError {
            stage,
            source,
            artifacts: self.artifacts.clone(),
        })?;
        let now = Instant::now();
        let ms = now.duration_since(self.clock).as_secs_f64() * 1e3;
        self.clock = now;
        Ok((out, ms))
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }
}

/// Runs every stage in order, writing artifacts into `out_dir`.
pub fn run_pipeline(source: &ScanSource, params: &PipelineParams, out_dir: &Path) -> Result<PipelineOutput, PipelineError> {
    let start = Instant::now();
    let mut run = Run {
        dir: out_dir,
        artifacts: Vec::new(),
        clock: start,
    };
    let mut inputs = Vec::new();

    let (frames, render_ms) = run.stage("render", |run| {
        fs::create_dir_all(run.dir)?;
        match source {
            ScanSource::Synthetic => {
                let rig = fixtures::scan_rig();
                let frames = render_rig(&fixtures::scan_scene(), &rig, &CameraIntrinsics::mkv2(), &params.noise, params.seed)?;
                let rig_path = run.path("rig.json");
                write_rig(&rig, &rig_path)?;
                for (frame, cam) in &frames {
                    let p = run.path(&format!("{}.dpf", cam.camera_id));
                    write_frame(frame, fs::File::create(p)?)?;
                }
                Ok(frames)
            }
            ScanSource::Recorded { rig, frames } => {
                inputs.push(rig.clone());
                let rig = read_rig(&fs::read_to_string(rig)?)?;
                load_frames(&rig, frames, &mut inputs)
            }
        }
    })?;
    let viewpoints = frames.iter().map(|(_, c)| c.origin()).collect();

    let (cloud, merge_ms) = run.stage("merge", |run| {
        let cloud = merge_scans(&frames, &TableSliceParams::above(params.z_cut_mm))?;
        ply::save_cloud(run.path("cloud.ply"), &cloud, Encoding::BinaryLittleEndian)?;
        Ok(cloud)
    })?;

    let (reconstructed, reconstruct_ms) = run.stage("reconstruct", |run| {
        let recon = ReconParams {
            viewpoints,
            ..ReconParams::with_grid(params.grid_resolution)
        };
        let mesh = reconstruct(&cloud, &recon)?;
        ply::save_mesh(run.path("reconstructed.ply"), &mesh, Encoding::BinaryLittleEndian)?;
        Ok(mesh)
    })?;

    let (decimated, decimate_ms) = run.stage("decimate", |run| {
        let target = params
            .target_triangles
            .unwrap_or_else(|| (reconstructed.triangle_count() / 10).min(MAX_DEFAULT_TRIANGLES));
        let out = decimate(&reconstructed, &DecimationParams::with_target(target))?;
        ply::save_mesh(run.path("decimated.ply"), &out.mesh, Encoding::BinaryLittleEndian)?;
        Ok(out)
    })?;

    let ((quality, filtered), quality_ms) = run.stage("quality", |run| {
        let q = QualityMap::compute(&decimated.mesh, &cloud)?;
        let f = filter_by_quality(&decimated.mesh, &q, params.filter_k)?;
        q.write_ply(fs::File::create(run.path("quality.ply"))?, &decimated.mesh, Encoding::BinaryLittleEndian)?;
        ply::save_mesh(run.path("patient.ply"), &f.mesh, Encoding::BinaryLittleEndian)?;
        Ok((q, f))
    })?;

    let total_ms = run.clock.duration_since(start).as_secs_f64() * 1e3;
    let stages = StageTimings {
        render_ms,
        merge_ms,
        reconstruct_ms,
        decimate_ms,
        quality_ms,
    };
    let run_path = out_dir.join("run.json");
    let mut artifacts = run.artifacts;
    artifacts.push(run_path.clone());
    let record = PipelineRun {
        stages,
        total_ms,
        seed: params.seed,
        cloud_points: cloud.len(),
        reconstructed_triangles: reconstructed.triangle_count(),
        decimation_rounds: decimated.rounds.len(),
        decimated_triangles: decimated.mesh.triangle_count(),
        output_triangles: filtered.mesh.triangle_count(),
        quality: quality.summary,
        cutoff_mm: filtered.cutoff_mm,
        inputs,
        artifacts: artifacts.clone(),
    };
    let json = serde_json::to_string_pretty(&record).map_err(Error::from);
    json.and_then(|j| fs::write(&run_path, j).map_err(Error::from))
        .map_err(|source| PipelineError {
            stage: "record",
            source,
            artifacts,
        })?;
    Ok(PipelineOutput {
        mesh: filtered.mesh,
        quality,
        run: record,
    })
}

fn load_frames(rig: &[CameraPose], dir: &Path, inputs: &mut Vec<PathBuf>) -> roomsim::Result<Vec<(DepthFrame, CameraPose)>> {
    rig.iter()
        .map(|cam| {
            let p = dir.join(format!("{}.dpf", cam.camera_id));
            let frame = read_frame(&fs::read(&p)?)?;
            inputs.push(p);
            Ok((frame, cam.clone()))
        })
        .collect()
}
