use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use roomsim::evalkit::{flat_surface_protocol, read_scenarios, run_scenarios, synthetic_scenarios, FlatSurfaceSpec};
use roomsim::machine::{MachineDefinition, MachineGeometry, MachineKind};
use roomsim::ply::{self, Encoding};
use roomsim::scan::{render_rig, write_frame, write_rig, CameraIntrinsics, NoiseModel};
use roomsim::surface::{
    decimate, filter_by_quality, marching_cubes, read_volume, reconstruct, DecimationParams, QualityMap, ReconParams,
    DEFAULT_FILTER_K,
};
use roomsim::{fixtures, RigidTransform};
use roomsim_service::pipeline::{run_pipeline, PipelineParams, ScanSource};
use roomsim_service::scene::{PatientInfo, SceneStore};
use roomsim_service::x3d::{self, Precision};

#[derive(Parser)]
#[command(name = "roomsim", version, about = "Treatment room simulator: scan, reconstruct, check clearance, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Depth-scan tools.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Point cloud (PLY) → surface mesh.
    Recon {
        cloud: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = ReconParams::default().grid_resolution)]
        grid: usize,
    },
    /// Mesh → simplified mesh.
    Decimate {
        mesh: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Target triangle count; a tenth of the input when omitted.
        #[arg(long)]
        target_tris: Option<usize>,
    },
    /// Per-vertex distance of a mesh to its source cloud, plus filtering.
    Quality {
        mesh: PathBuf,
        cloud: PathBuf,
        /// Mesh with per-vertex quality.
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the mesh with low-quality vertices removed.
        #[arg(long)]
        filtered: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FILTER_K)]
        k: f64,
    },
    /// Scalar volume (JSON header) → isosurface mesh.
    Mc {
        header: PathBuf,
        #[arg(long)]
        iso: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Frames → patient surface, end to end.
    Pipeline(PipelineArgs),
    /// Accuracy assessment.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// X3D export.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Serve the scene over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[command(flatten)]
        machine: MachineArgs,
    },
}

#[derive(Subcommand)]
enum ScanCommand {
    /// Render the bundled mannequin with the bundled rig.
    Simulate {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Depth noise scale; 0 renders exact depths.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, short)]
    out: PathBuf,
    /// Rig file of recorded frames; the synthetic scene is scanned when omitted.
    #[arg(long, requires = "frames")]
    rig: Option<PathBuf>,
    /// Directory of `<camera_id>.dpf` frames.
    #[arg(long, requires = "rig")]
    frames: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = ReconParams::default().grid_resolution)]
    grid: usize,
    #[arg(long)]
    target_tris: Option<usize>,
    #[arg(long, default_value_t = fixtures::SCAN_Z_CUT_MM, allow_hyphen_values = true)]
    z_cut: f64,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Flat plate protocol at 1 m and 2 m.
    Flat {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Simulated vs measured clearances.
    Scenarios {
        /// Scenario list (JSON); a synthetic set is generated when omitted.
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[command(flatten)]
        machine: MachineArgs,
    },
}

#[derive(Subcommand)]
enum ExportCommand {
    /// A mesh, or the machine scene at its default pose.
    X3d {
        /// Mesh to export alone; the machine scene is exported when omitted.
        mesh: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Significant digits; shortest exact formatting when omitted.
        #[arg(long)]
        digits: Option<usize>,
        #[command(flatten)]
        machine: MachineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Standin {
    Xrt,
    Pt,
}

#[derive(Args)]
struct MachineArgs {
    /// Machine definition file; the bundled stand-in is used when omitted.
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Standin::Xrt, conflicts_with = "machine")]
    standin: Standin,
    /// Patient surface (PLY) placed on the couch top; the bundled mannequin when omitted.
    #[arg(long)]
    patient: Option<PathBuf>,
    /// Start without a patient.
    #[arg(long, conflicts_with = "patient")]
    no_patient: bool,
}

impl MachineArgs {
    fn load(&self) -> Result<(MachineGeometry, String, Option<PatientInfo>)> {
        let (geom, reference) = match &self.machine {
            Some(p) => (
                MachineDefinition::load(p).with_context(|| format!("loading machine {}", p.display()))?,
                p.display().to_string(),
            ),
            None => {
                let (kind, name) = match self.standin {
                    Standin::Xrt => (MachineKind::Xrt, "standin:xrt"),
                    Standin::Pt => (MachineKind::Pt, "standin:pt"),
                };
                (MachineGeometry::standin(kind), name.to_string())
            }
        };
        if self.no_patient {
            return Ok((geom, reference, None));
        }
        let (mesh, source) = match &self.patient {
            Some(p) => (
                ply::read_mesh(p).with_context(|| format!("reading patient {}", p.display()))?,
                p.display().to_string(),
            ),
            None => (fixtures::mannequin(), "fixture:mannequin".to_string()),
        };
        let info = PatientInfo {
            source,
            triangles: mesh.triangle_count(),
            couch_offset: RigidTransform::identity(),
        };
        Ok((geom.attach_patient(mesh, info.couch_offset)?, reference, Some(info)))
    }
}

fn precision(digits: Option<usize>) -> Result<Precision> {
    match digits {
        None => Ok(Precision::Exact),
        Some(d @ 1..=17) => Ok(Precision::Significant(d)),
        Some(d) => bail!("--digits must be in 1..=17, got {d}"),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn save_mesh(path: &Path, mesh: &roomsim::TriMesh) -> Result<()> {
    ply::save_mesh(path, mesh, Encoding::BinaryLittleEndian).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Scan(ScanCommand::Simulate { out, seed, noise }) => {
            fs::create_dir_all(&out)?;
            let rig = fixtures::scan_rig();
            let noise = NoiseModel::default().scaled(noise);
            let frames = render_rig(&fixtures::scan_scene(), &rig, &CameraIntrinsics::mkv2(), &noise, seed)?;
            write_rig(&rig, out.join("rig.json"))?;
            for (frame, cam) in &frames {
                let p = out.join(format!("{}.dpf", cam.camera_id));
                write_frame(frame, fs::File::create(&p)?)?;
                println!("{} {} valid pixels", p.display(), frame.valid_count());
            }
        }
        Command::Recon { cloud, out, grid } => {
            let cloud = ply::read_cloud(&cloud)?;
            let mesh = reconstruct(&cloud, &ReconParams::with_grid(grid))?;
            save_mesh(&out, &mesh)?;
            println!("{} points → {} triangles", cloud.len(), mesh.triangle_count());
        }
        Command::Decimate { mesh, out, target_tris } => {
            let mesh = ply::read_mesh(&mesh)?;
            let params = match target_tris {
                Some(t) => DecimationParams::with_target(t),
                None => DecimationParams::default(),
            };
            let d = decimate(&mesh, &params)?;
            save_mesh(&out, &d.mesh)?;
            println!(
                "{} → {} triangles in {} rounds",
                mesh.triangle_count(),
                d.mesh.triangle_count(),
                d.rounds.len()
            );
        }
        Command::Quality { mesh, cloud, out, filtered, k } => {
            let mesh = ply::read_mesh(&mesh)?;
            let cloud = ply::read_cloud(&cloud)?;
            let q = QualityMap::compute(&mesh, &cloud)?;
            q.write_ply(fs::File::create(&out)?, &mesh, Encoding::BinaryLittleEndian)?;
            println!("{}", q.summary);
            if let Some(path) = filtered {
                let f = filter_by_quality(&mesh, &q, k)?;
                save_mesh(&path, &f.mesh)?;
                println!(
                    "cutoff {:.3} mm: kept {} of {} vertices",
                    f.cutoff_mm,
                    f.mesh.vertex_count(),
                    mesh.vertex_count()
                );
            }
        }
        Command::Mc { header, iso, out } => {
            let vol = read_volume(&header)?;
            let mesh = marching_cubes(&vol, iso)?;
            save_mesh(&out, &mesh)?;
            println!("{} triangles", mesh.triangle_count());
        }
        Command::Pipeline(a) => {
            let source = match (a.rig, a.frames) {
                (Some(rig), Some(frames)) => ScanSource::Recorded { rig, frames },
                _ => ScanSource::Synthetic,
            };
            let params = PipelineParams {
                seed: a.seed,
                grid_resolution: a.grid,
                target_triangles: a.target_tris,
                z_cut_mm: a.z_cut,
                ..Default::default()
            };
            let out = run_pipeline(&source, &params, &a.out)?;
            print_json(&out.run)?;
        }
        Command::Eval(EvalCommand::Flat { seed }) => {
            let noise = NoiseModel::default();
            for spec in FlatSurfaceSpec::bench() {
                let r = flat_surface_protocol(&spec, &noise, seed)?;
                println!(
                    "{:.1} x {:.1} m at {:.0} m: {}",
                    spec.width_m, spec.height_m, spec.distance_m, r
                );
            }
        }
        Command::Eval(EvalCommand::Scenarios { file, seed, machine }) => {
            let (geom, _, _) = machine.load()?;
            let scenarios = match file {
                Some(p) => read_scenarios(&fs::read_to_string(&p)?)?,
                None => synthetic_scenarios(&geom, seed)?,
            };
            print_json(&run_scenarios(&scenarios, &geom))?;
        }
        Command::Export(ExportCommand::X3d { mesh, out, digits, machine }) => {
            let precision = precision(digits)?;
            let doc = match mesh {
                Some(p) => x3d::export_mesh(&ply::read_mesh(&p)?, precision),
                None => {
                    let (geom, reference, patient) = machine.load()?;
                    let store = SceneStore::new(geom, reference, patient)?;
                    x3d::export_scene(&store.snapshot().posed, precision)
                }
            };
            fs::write(&out, &doc)?;
            println!("{} bytes", doc.len());
        }
        Command::Serve { bind, machine } => {
            let (geom, reference, patient) = machine.load()?;
            let store = Arc::new(SceneStore::new(geom, reference, patient)?);
            serve(store, &bind)?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn serve(store: Arc<SceneStore>, bind: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .with_context(|| format!("binding {bind}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, roomsim_service::http::router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
