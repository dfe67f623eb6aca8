//! Depth frame files and rig files.
//!
//! A depth frame file is little-endian: the magic `DPF1`, `u32` width and
//! height, `f32` fx, fy, cx, cy, then `width * height` `u16` depths row-major
//! with the top row first. A rig file is a JSON array of
//! `{camera_id, rotation: [9 row-major], translation_mm: [3]}`.

use std::io::Write;
use std::path::Path;

use super::{CameraIntrinsics, CameraPose, DepthFrame};
use crate::{Error, Result};

pub const DPF_MAGIC: &[u8; 4] = b"DPF1";
const HEADER_LEN: usize = 4 + 4 * 2 + 4 * 4;

pub fn write_frame(frame: &DepthFrame, mut out: impl Write) -> Result<()> {
    let i = frame.intrinsics();
    let mut buf = Vec::with_capacity(HEADER_LEN + 2 * frame.depths().len());
    buf.extend_from_slice(DPF_MAGIC);
    buf.extend_from_slice(&i.width.to_le_bytes());
    buf.extend_from_slice(&i.height.to_le_bytes());
    for v in [i.fx, i.fy, i.cx, i.cy] {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for d in frame.depths() {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_frame(bytes: &[u8]) -> Result<DepthFrame> {
    let bad = |reason: String| Error::format("DPF1", reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != DPF_MAGIC {
        return Err(bad("missing DPF1 magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
    let (width, height) = (u32_at(4), u32_at(8));
    let pixels = (width as u64) * (height as u64);
    let expected = HEADER_LEN as u64 + 2 * pixels;
    if bytes.len() as u64 != expected {
        return Err(bad(format!(
            "{width}x{height} frame needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let intr = CameraIntrinsics::new(width, height, f32_at(12), f32_at(16), f32_at(20), f32_at(24))
        .map_err(|e| bad(e.to_string()))?;
    let depths = bytes[HEADER_LEN..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    DepthFrame::new(intr, depths)
}

pub fn read_rig(json: &str) -> Result<Vec<CameraPose>> {
    let rig: Vec<CameraPose> = serde_json::from_str(json)?;
    let mut ids: Vec<&str> = rig.iter().map(|c| c.camera_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::format("rig", format!("camera `{}` listed twice", w[0])));
    }
    Ok(rig)
}

pub fn write_rig(rig: &[CameraPose], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(rig)?)?;
    Ok(())
}
