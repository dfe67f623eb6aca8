//! Scalar volumes and their on-disk form: a JSON header
//! `{dims, spacing_mm, origin_mm, dtype: "i16" | "f32", data}` next to a raw
//! little-endian sample file in x-fastest order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: [usize; 3],
    spacing: Vec3,
    origin: Vec3,
    samples: Vec<f32>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: Vec3, origin: Vec3, samples: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidVolume(format!("dims {dims:?} must be at least 2 per axis")));
        }
        if !spacing.iter().all(|s| s.is_finite() && *s > 0.0) || !origin.iter().all(|o| o.is_finite()) {
            return Err(Error::InvalidVolume(format!("bad spacing {spacing:?} or origin {origin:?}")));
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if n != Some(samples.len()) {
            return Err(Error::InvalidVolume(format!(
                "{} samples for dims {dims:?}",
                samples.len()
            )));
        }
        Ok(Self { dims, spacing, origin, samples })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(dims: [usize; 3], spacing: Vec3, origin: Vec3, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin + spacing.component_mul(&Vec3::new(i as f64, j as f64, k as f64));
                    samples.push(f(&p) as f32);
                }
            }
        }
        Self::new(dims, spacing, origin, samples)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, at: [usize; 3]) -> f32 {
        self.samples[self.index(at)]
    }

    pub fn position(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin + self.spacing.component_mul(&Vec3::new(i as f64, j as f64, k as f64))
    }

    /// (min, max) over the samples; `None` if any sample is NaN.
    pub fn range(&self) -> Option<(f32, f32)> {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &s in &self.samples {
            if s.is_nan() {
                return None;
            }
            lo = lo.min(s);
            hi = hi.max(s);
        }
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleType {
    #[serde(rename = "i16")]
    I16,
    #[serde(rename = "f32")]
    F32,
}

impl SampleType {
    fn size(self) -> usize {
        match self {
            SampleType::I16 => 2,
            SampleType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: SampleType,
    pub data: String,
}

impl VolumeHeader {
    pub fn parse(json: &str) -> Result<VolumeHeader> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn sample_count(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }

    /// Decodes the raw sample bytes described by this header.
    pub fn decode(&self, raw: &[u8]) -> Result<ScalarVolume> {
        let n = self
            .sample_count()
            .ok_or_else(|| Error::InvalidVolume(format!("dims {:?} overflow", self.dims)))?;
        let expected = n.checked_mul(self.dtype.size());
        if expected != Some(raw.len()) {
            return Err(Error::InvalidVolume(format!(
                "{} raw bytes for {n} {:?} samples",
                raw.len(),
                self.dtype
            )));
        }
        let samples = match self.dtype {
            SampleType::I16 => raw
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
                .collect(),
            SampleType::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        };
        ScalarVolume::new(self.dims, self.spacing_mm.into(), self.origin_mm.into(), samples)
    }
}

/// Reads a header and the raw file it names (relative to the header).
pub fn read_volume(header_path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let header_path = header_path.as_ref();
    let header = VolumeHeader::parse(&std::fs::read_to_string(header_path)?)?;
    let base = header_path.parent().unwrap_or_else(|| Path::new("."));
    let raw = std::fs::read(base.join(&header.data))?;
    header.decode(&raw)
}

/// Writes `vol` as f32 samples. Returns the raw file path.
pub fn write_volume(vol: &ScalarVolume, header_path: impl AsRef<Path>) -> Result<PathBuf> {
    let header_path = header_path.as_ref();
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("volume");
    let data = format!("{stem}.raw");
    let raw_path = header_path.with_file_name(&data);
    let mut raw = Vec::with_capacity(vol.samples.len() * 4);
    for s in &vol.samples {
        raw.extend_from_slice(&s.to_le_bytes());
    }
    std::fs::write(&raw_path, raw)?;
    let header = VolumeHeader {
        dims: vol.dims,
        spacing_mm: vol.spacing.into(),
        origin_mm: vol.origin.into(),
        dtype: SampleType::F32,
        data,
    };
    std::fs::write(header_path, serde_json::to_string_pretty(&header)?)?;
    Ok(raw_path)
}
