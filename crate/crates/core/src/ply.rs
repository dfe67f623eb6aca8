//! PLY reading and writing for point clouds, meshes and quality maps.
//!
//! Reads ASCII and binary little-endian files with arbitrary scalar property
//! types; polygons are fan-triangulated. Writes `float` coordinates and
//! `uchar`/`int` face lists.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::geometry::{PointCloud, TriMesh, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::format("PLY", format!("unknown scalar type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Everything this crate extracts from a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub quality: Option<Vec<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl PlyData {
    pub fn into_mesh(self) -> Result<TriMesh> {
        TriMesh::new(self.positions, self.triangles)
    }

    pub fn into_cloud(self) -> Result<PointCloud> {
        match self.normals {
            Some(n) => PointCloud::with_normals(self.positions, n),
            None => PointCloud::new(self.positions),
        }
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::format("PLY", "unexpected end of data"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn binary(&mut self, ty: Scalar) -> Result<f64> {
        let b = self.take(ty.size())?;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }

    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.data[self.pos..];
        if rest.is_empty() {
            return Err(Error::format("PLY", "unexpected end of data"));
        }
        let len = rest.iter().position(|&c| c == b'\n').unwrap_or(rest.len());
        self.pos += (len + 1).min(rest.len());
        std::str::from_utf8(&rest[..len])
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| Error::format("PLY", "non-UTF-8 text"))
    }
}

/// Per-element property slots this reader cares about.
#[derive(Default)]
struct VertexSlots {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
    quality: Option<usize>,
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<(Encoding, Vec<Element>)> {
    if cur.line()?.trim() != "ply" {
        return Err(Error::format("PLY", "missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = cur.line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                encoding = Some(match words.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLittleEndian,
                    Some(other) => {
                        return Err(Error::format("PLY", format!("unsupported format `{other}`")))
                    }
                    None => return Err(Error::format("PLY", "format line without a value")),
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words
                    .next()
                    .ok_or_else(|| Error::format("PLY", "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::format("PLY", "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::format("PLY", "property before any element"))?;
                let kind = match words.next() {
                    Some("list") => {
                        let count = Scalar::parse(words.next().unwrap_or(""))?;
                        if matches!(count, Scalar::F32 | Scalar::F64) {
                            return Err(Error::format("PLY", "list count must be an integer"));
                        }
                        let item = Scalar::parse(words.next().unwrap_or(""))?;
                        PropertyKind::List { count, item }
                    }
                    Some(ty) => PropertyKind::Scalar(Scalar::parse(ty)?),
                    None => return Err(Error::format("PLY", "property without a type")),
                };
                let name = words
                    .next()
                    .ok_or_else(|| Error::format("PLY", "property without a name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::format("PLY", format!("unexpected header keyword `{other}`")))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format("PLY", "missing format line"))?;
    Ok((encoding, elements))
}

/// Parses a complete PLY file held in memory.
pub fn parse(data: &[u8]) -> Result<PlyData> {
    let mut cur = Cursor { data, pos: 0 };
    let (encoding, elements) = parse_header(&mut cur)?;
    let mut out = PlyData::default();
    let mut saw_vertex = false;

    for element in &elements {
        let is_vertex = element.name == "vertex";
        let is_face = element.name == "face";
        let mut slots = VertexSlots::default();
        let mut face_list = None;
        for (i, p) in element.properties.iter().enumerate() {
            match (&p.kind, p.name.as_str()) {
                (PropertyKind::Scalar(_), "x") => slots.xyz[0] = Some(i),
                (PropertyKind::Scalar(_), "y") => slots.xyz[1] = Some(i),
                (PropertyKind::Scalar(_), "z") => slots.xyz[2] = Some(i),
                (PropertyKind::Scalar(_), "nx") => slots.normal[0] = Some(i),
                (PropertyKind::Scalar(_), "ny") => slots.normal[1] = Some(i),
                (PropertyKind::Scalar(_), "nz") => slots.normal[2] = Some(i),
                (PropertyKind::Scalar(_), "quality") => slots.quality = Some(i),
                (PropertyKind::List { .. }, "vertex_indices" | "vertex_index") => {
                    face_list = Some(i)
                }
                _ => {}
            }
        }
        if is_vertex {
            if saw_vertex {
                return Err(Error::format("PLY", "duplicate vertex element"));
            }
            saw_vertex = true;
            if slots.xyz.iter().any(Option::is_none) {
                return Err(Error::format("PLY", "vertex element lacks x, y or z"));
            }
        }
        if is_face && face_list.is_none() {
            return Err(Error::format("PLY", "face element lacks vertex_indices"));
        }
        let has_normals = is_vertex && slots.normal.iter().all(Option::is_some);
        let has_quality = is_vertex && slots.quality.is_some();

        // Every record occupies at least one byte, which bounds preallocation
        // for hostile counts.
        let cap = element.count.min(cur.remaining());
        if is_vertex {
            out.positions.reserve(cap);
            if has_normals {
                out.normals = Some(Vec::with_capacity(cap));
            }
            if has_quality {
                out.quality = Some(Vec::with_capacity(cap));
            }
        }

        let mut scalars = vec![0.0f64; element.properties.len()];
        let mut list: Vec<f64> = Vec::new();
        for _ in 0..element.count {
            list.clear();
            match encoding {
                Encoding::BinaryLittleEndian => {
                    for (i, p) in element.properties.iter().enumerate() {
                        match p.kind {
                            PropertyKind::Scalar(ty) => scalars[i] = cur.binary(ty)?,
                            PropertyKind::List { count, item } => {
                                let n = cur.binary(count)?;
                                if n < 0.0 {
                                    return Err(Error::format("PLY", "negative list length"));
                                }
                                let keep = Some(i) == face_list;
                                for _ in 0..n as usize {
                                    let v = cur.binary(item)?;
                                    if keep {
                                        list.push(v);
                                    }
                                }
                            }
                        }
                    }
                }
                Encoding::Ascii => {
                    let line = cur.line()?;
                    let mut tokens = line.split_whitespace();
                    let mut next = |ty: Scalar| -> Result<f64> {
                        let t = tokens
                            .next()
                            .ok_or_else(|| Error::format("PLY", "missing ASCII value"))?;
                        let v = match ty {
                            Scalar::F32 => t.parse::<f32>().map(f64::from).ok(),
                            _ => t.parse::<f64>().ok(),
                        };
                        v.ok_or_else(|| Error::format("PLY", format!("bad ASCII value `{t}`")))
                    };
                    for (i, p) in element.properties.iter().enumerate() {
                        match p.kind {
                            PropertyKind::Scalar(ty) => scalars[i] = next(ty)?,
                            PropertyKind::List { count, item } => {
                                let n = next(count)?;
                                if !(0.0..=1e9).contains(&n) || n.fract() != 0.0 {
                                    return Err(Error::format("PLY", "bad list length"));
                                }
                                let keep = Some(i) == face_list;
                                for _ in 0..n as usize {
                                    let v = next(item)?;
                                    if keep {
                                        list.push(v);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if is_vertex {
                let get = |s: Option<usize>| scalars[s.unwrap()];
                out.positions
                    .push(Vec3::new(get(slots.xyz[0]), get(slots.xyz[1]), get(slots.xyz[2])));
                if let Some(ns) = out.normals.as_mut() {
                    ns.push(Vec3::new(
                        get(slots.normal[0]),
                        get(slots.normal[1]),
                        get(slots.normal[2]),
                    ));
                }
                if let Some(q) = out.quality.as_mut() {
                    q.push(get(slots.quality));
                }
            } else if is_face {
                if list.iter().any(|&v| !(0.0..=u32::MAX as f64).contains(&v) || v.fract() != 0.0) {
                    return Err(Error::format("PLY", "face index is not a valid vertex index"));
                }
                for k in 1..list.len().saturating_sub(1) {
                    out.triangles
                        .push([list[0] as u32, list[k] as u32, list[k + 1] as u32]);
                }
            }
        }
    }
    if !saw_vertex {
        return Err(Error::format("PLY", "no vertex element"));
    }
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<PlyData> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    read(path)?.into_mesh()
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    read(path)?.into_cloud()
}

fn format_name(encoding: Encoding) -> &'static str {
    match encoding {
        Encoding::Ascii => "ascii",
        Encoding::BinaryLittleEndian => "binary_little_endian",
    }
}

struct VertexColumns<'a> {
    positions: &'a [Vec3],
    normals: Option<&'a [Vec3]>,
    quality: Option<&'a [f64]>,
    colors: Option<&'a [[u8; 3]]>,
}

fn write_ply<W: Write>(
    w: W,
    encoding: Encoding,
    v: VertexColumns<'_>,
    triangles: &[[u32; 3]],
    with_faces: bool,
) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "ply")?;
    writeln!(w, "format {} 1.0", format_name(encoding))?;
    writeln!(w, "element vertex {}", v.positions.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    if v.normals.is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(w, "property float {axis}")?;
        }
    }
    if v.quality.is_some() {
        writeln!(w, "property float quality")?;
    }
    if v.colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(w, "property uchar {c}")?;
        }
    }
    if with_faces {
        writeln!(w, "element face {}", triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;

    for (i, p) in v.positions.iter().enumerate() {
        let mut floats: Vec<f32> = vec![p.x as f32, p.y as f32, p.z as f32];
        if let Some(ns) = v.normals {
            floats.extend([ns[i].x as f32, ns[i].y as f32, ns[i].z as f32]);
        }
        if let Some(q) = v.quality {
            floats.push(q[i] as f32);
        }
        match encoding {
            Encoding::Ascii => {
                let mut fields: Vec<String> = floats.iter().map(|f| f.to_string()).collect();
                if let Some(cs) = v.colors {
                    fields.extend(cs[i].iter().map(|c| c.to_string()));
                }
                writeln!(w, "{}", fields.join(" "))?;
            }
            Encoding::BinaryLittleEndian => {
                for f in floats {
                    w.write_all(&f.to_le_bytes())?;
                }
                if let Some(cs) = v.colors {
                    w.write_all(&cs[i])?;
                }
            }
        }
    }
    if with_faces {
        for t in triangles {
            match encoding {
                Encoding::Ascii => writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?,
                Encoding::BinaryLittleEndian => {
                    w.write_all(&[3u8])?;
                    for &i in t {
                        w.write_all(&(i as i32).to_le_bytes())?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_mesh<W: Write>(w: W, mesh: &TriMesh, encoding: Encoding) -> Result<()> {
    let cols = VertexColumns {
        positions: mesh.vertices(),
        normals: None,
        quality: None,
        colors: None,
    };
    write_ply(w, encoding, cols, mesh.triangles(), true)
}

pub fn write_cloud<W: Write>(w: W, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    let cols = VertexColumns {
        positions: cloud.points(),
        normals: cloud.normals(),
        quality: None,
        colors: None,
    };
    write_ply(w, encoding, cols, &[], false)
}

/// Mesh with per-vertex `quality` and `red`/`green`/`blue` properties.
pub fn write_quality_mesh<W: Write>(
    w: W,
    mesh: &TriMesh,
    quality: &[f64],
    colors: &[[u8; 3]],
    encoding: Encoding,
) -> Result<()> {
    if quality.len() != mesh.vertex_count() || colors.len() != mesh.vertex_count() {
        return Err(Error::InvalidGeometry(
            "quality/color arrays do not match the vertex count".into(),
        ));
    }
    let cols = VertexColumns {
        positions: mesh.vertices(),
        normals: None,
        quality: Some(quality),
        colors: Some(colors),
    };
    write_ply(w, encoding, cols, mesh.triangles(), true)
}

pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriMesh, encoding: Encoding) -> Result<()> {
    write_mesh(File::create(path)?, mesh, encoding)
}

pub fn save_cloud(path: impl AsRef<Path>, cloud: &PointCloud, encoding: Encoding) -> Result<()> {
    write_cloud(File::create(path)?, cloud, encoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn f32_round(v: &Vec3) -> Vec3 {
        v.map(|c| c as f32 as f64)
    }

    #[test]
    fn mesh_round_trip_both_encodings() {
        let mesh = shapes::icosphere(Vec3::new(1.0, 2.0, 3.0), 10.0, 2);
        for enc in [Encoding::Ascii, Encoding::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_mesh(&mut buf, &mesh, enc).unwrap();
            let back = parse(&buf).unwrap().into_mesh().unwrap();
            assert_eq!(back.triangles(), mesh.triangles());
            for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
                assert_eq!(*a, f32_round(b));
            }
        }
    }

    #[test]
    fn cloud_with_normals_round_trip() {
        let cloud = PointCloud::with_normals(
            vec![Vec3::new(0.5, 1.5, -2.0), Vec3::new(100.0, 0.0, 3.25)],
            vec![Vec3::z(), Vec3::new(1.0, 1.0, 0.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_cloud(&mut buf, &cloud, Encoding::BinaryLittleEndian).unwrap();
        let back = parse(&buf).unwrap().into_cloud().unwrap();
        assert_eq!(back.points(), cloud.points());
        let n = back.normals().unwrap();
        assert!((n[1] - cloud.normals().unwrap()[1]).norm() < 1e-6);
    }

    #[test]
    fn reads_foreign_ascii_with_quads_and_extras() {
        let text = "ply\nformat ascii 1.0\ncomment made elsewhere\n\
            element vertex 4\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\n\
            element face 1\nproperty list uchar uint vertex_index\n\
            element edge 1\nproperty int vertex1\nproperty int vertex2\nend_header\n\
            0 0 0 255\n1 0 0 0\n1 1 0 0\n0 1 0 0\n4 0 1 2 3\n0 1\n";
        let data = parse(text.as_bytes()).unwrap();
        assert_eq!(data.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(data.normals.is_none());
    }

    #[test]
    fn quality_export_has_color_properties() {
        let mesh = shapes::cuboid(Vec3::zeros(), Vec3::repeat(1.0));
        let q = vec![0.5; 8];
        let c = vec![[0, 0, 255]; 8];
        let mut buf = Vec::new();
        write_quality_mesh(&mut buf, &mesh, &q, &c, Encoding::Ascii).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("property float quality"));
        assert!(text.contains("property uchar blue"));
        assert_eq!(parse(&buf).unwrap().quality.unwrap(), q);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            &b""[..],
            b"plx\n",
            b"ply\nformat binary_big_endian 1.0\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n",
            b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
            b"ply\nformat binary_little_endian 1.0\nelement vertex 4000000000\nproperty float x\nproperty float y\nproperty float z\nend_header\n\x00\x00",
        ] {
            assert!(parse(bad).is_err());
        }
    }

    #[test]
    fn out_of_range_face_index_is_rejected_by_mesh() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
            element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n";
        assert!(parse(text.as_bytes()).unwrap().into_mesh().is_err());
    }
}
