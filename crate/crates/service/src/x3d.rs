//! X3D 3.3 subset: Scene, Transform, Shape, IndexedFaceSet and Coordinate.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use roomsim::machine::PosedScene;
use roomsim::{Error, Result, RigidTransform, TriMesh, Vec3};

/// Number formatting for coordinates and transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Shortest text that parses back to the same `f64`.
    #[default]
    Exact,
    /// Rounded to this many significant digits.
    Significant(usize),
}

impl Precision {
    fn write(self, out: &mut String, v: f64) {
        match self {
            Precision::Exact => write!(out, "{v}").unwrap(),
            Precision::Significant(digits) => out.push_str(&significant(v, digits)),
        }
    }
}

/// `v` with `digits` significant digits and no trailing zeros.
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// A named mesh with its placement.
#[derive(Debug, Clone)]
pub struct X3dShape {
    pub name: Option<String>,
    pub mesh: TriMesh,
    pub transform: RigidTransform,
}

impl X3dShape {
    pub fn world_mesh(&self) -> TriMesh {
        self.mesh.transformed(&self.transform)
    }
}

const HEADER: &str = concat!(
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
    "<!DOCTYPE X3D PUBLIC \"ISO//Web3D//DTD X3D 3.3//EN\" \"http://www.web3d.org/specifications/x3d-3.3.dtd\">\n",
    "<X3D profile=\"Interchange\" version=\"3.3\">\n",
    "<Scene>\n",
);
const FOOTER: &str = "</Scene>\n</X3D>\n";

fn write_face_set(out: &mut String, mesh: &TriMesh, precision: Precision) {
    out.push_str("<Shape>\n<IndexedFaceSet solid=\"false\" coordIndex=\"");
    for (i, t) in mesh.triangles().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{} {} {} -1", t[0], t[1], t[2]).unwrap();
    }
    out.push_str("\">\n<Coordinate point=\"");
    for (i, v) in mesh.vertices().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        precision.write(out, v.x);
        out.push(' ');
        precision.write(out, v.y);
        out.push(' ');
        precision.write(out, v.z);
    }
    out.push_str("\"/>\n</IndexedFaceSet>\n</Shape>\n");
}

fn write_transform_open(out: &mut String, name: &str, t: &RigidTransform, precision: Precision) {
    let (axis, angle) = t.axis_angle();
    out.push_str("<Transform DEF=\"");
    out.push_str(&escape(name));
    out.push_str("\" translation=\"");
    let tr = t.translation();
    for (i, v) in [tr.x, tr.y, tr.z].into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        precision.write(out, v);
    }
    out.push_str("\" rotation=\"");
    for (i, v) in [axis.x, axis.y, axis.z, angle].into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        precision.write(out, v);
    }
    out.push_str("\">\n");
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// A single mesh, untransformed.
pub fn export_mesh(mesh: &TriMesh, precision: Precision) -> String {
    let mut out = String::from(HEADER);
    write_face_set(&mut out, mesh, precision);
    out.push_str(FOOTER);
    out
}

/// Every posed component as a named Transform around its local mesh.
pub fn export_scene(scene: &PosedScene, precision: Precision) -> String {
    let mut out = String::from(HEADER);
    for c in scene.components() {
        write_transform_open(&mut out, &c.name, &c.pose, precision);
        write_face_set(&mut out, c.body.mesh(), precision);
        out.push_str("</Transform>\n");
    }
    out.push_str(FOOTER);
    out
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "X3D",
        reason: reason.into(),
    }
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{s}` is not a finite number")))
        })
        .collect()
}

fn indices(text: &str) -> Result<Vec<i64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|_| bad(format!("`{s}` is not an index"))))
        .collect()
}

fn attr(e: &BytesStart, name: &[u8]) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| bad(err.to_string()))?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| bad(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn transform_of(e: &BytesStart) -> Result<RigidTransform> {
    let mut t = Vec3::zeros();
    if let Some(s) = attr(e, b"translation")? {
        let v = numbers(&s)?;
        if v.len() != 3 {
            return Err(bad("translation needs 3 numbers"));
        }
        t = Vec3::new(v[0], v[1], v[2]);
    }
    let mut r = RigidTransform::identity();
    if let Some(s) = attr(e, b"rotation")? {
        let v = numbers(&s)?;
        if v.len() != 4 {
            return Err(bad("rotation needs 4 numbers"));
        }
        let axis = Vec3::new(v[0], v[1], v[2]);
        if v[3] != 0.0 {
            if axis.norm() < 1e-12 {
                return Err(bad("rotation axis is zero"));
            }
            r = RigidTransform::from_axis_angle(axis, v[3]);
        }
    }
    Ok(RigidTransform::from_translation(t).compose(&r))
}

#[derive(Default)]
struct PendingShape {
    name: Option<String>,
    transform: Option<RigidTransform>,
    coord_index: Vec<i64>,
    points: Vec<f64>,
}

fn finish_shape(s: PendingShape) -> Result<Option<X3dShape>> {
    if s.points.len() % 3 != 0 {
        return Err(bad("point count is not a multiple of 3"));
    }
    let vertices: Vec<Vec3> = s.points.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let mut triangles = Vec::new();
    for face in s.coord_index.split(|&i| i == -1) {
        if face.is_empty() {
            continue;
        }
        if face.len() < 3 {
            return Err(bad("face with fewer than 3 indices"));
        }
        let idx: Vec<u32> = face
            .iter()
            .map(|&i| {
                usize::try_from(i)
                    .ok()
                    .filter(|&i| i < vertices.len())
                    .map(|i| i as u32)
                    .ok_or_else(|| bad(format!("coordIndex {i} out of range")))
            })
            .collect::<Result<_>>()?;
        for k in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    if triangles.is_empty() {
        return Ok(None);
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    Ok(Some(X3dShape {
        name: s.name,
        mesh,
        transform: s.transform.unwrap_or_else(RigidTransform::identity),
    }))
}

/// Reads the subset written by [`export_scene`] and [`export_mesh`]. Nested
/// Transforms compose; other nodes are skipped.
pub fn import(text: &str) -> Result<Vec<X3dShape>> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<(RigidTransform, Option<String>)> = vec![(RigidTransform::identity(), None)];
    let mut shape: Option<PendingShape> = None;
    let mut shapes = Vec::new();
    let mut depth = 0usize;
    loop {
        let event = reader.read_event().map_err(|e| bad(e.to_string()))?;
        let (e, empty) = match &event {
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(e) => {
                depth = depth.checked_sub(1).ok_or_else(|| bad("unbalanced end tag"))?;
                match e.name().as_ref() {
                    b"Transform" => {
                        if stack.len() <= 1 {
                            return Err(bad("unbalanced Transform"));
                        }
                        stack.pop();
                    }
                    b"Shape" => {
                        if let Some(s) = shape.take() {
                            shapes.extend(finish_shape(s)?);
                        }
                    }
                    _ => {}
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        if !empty {
            depth += 1;
            if depth > 256 {
                return Err(bad("nesting too deep"));
            }
        }
        match e.name().as_ref() {
            b"Transform" => {
                let (parent, parent_name) = stack.last().cloned().expect("root frame");
                let name = attr(e, b"DEF")?.or(parent_name);
                if !empty {
                    stack.push((parent.compose(&transform_of(e)?), name));
                } else {
                    transform_of(e)?;
                }
            }
            b"Shape" => {
                let (t, name) = stack.last().cloned().expect("root frame");
                let s = PendingShape {
                    name,
                    transform: Some(t),
                    ..Default::default()
                };
                if empty {
                    shapes.extend(finish_shape(s)?);
                } else {
                    shape = Some(s);
                }
            }
            b"IndexedFaceSet" => {
                let s = shape.as_mut().ok_or_else(|| bad("IndexedFaceSet outside Shape"))?;
                if let Some(ci) = attr(e, b"coordIndex")? {
                    s.coord_index = indices(&ci)?;
                }
            }
            b"Coordinate" => {
                let s = shape.as_mut().ok_or_else(|| bad("Coordinate outside Shape"))?;
                if let Some(p) = attr(e, b"point")? {
                    s.points = numbers(&p)?;
                }
            }
            _ => {}
        }
    }
    if depth != 0 || shape.is_some() {
        return Err(bad("document ends inside an element"));
    }
    Ok(shapes)
}
