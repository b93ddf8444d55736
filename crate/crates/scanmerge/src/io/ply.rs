//! PLY reading and writing for meshes and colored point clouds.
//!
//! Coordinates are stored as `double`, colors as `uchar`, and laser-scan
//! origin distances as an optional `double origin_distance` vertex property.
//! Both ASCII and binary little-endian variants are supported; binary files
//! round-trip bit-exactly, and ASCII files do too because floats are printed
//! in shortest-roundtrip form. Unknown properties and elements are skipped on
//! read, so clouds written by other tools load as long as the required
//! properties are present.

use crate::geom::{ColoredPointCloud, Point3, TriMesh};
use crate::{Error, Result};
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Float,
    Double,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::Char,
            "uchar" | "uint8" => Scalar::UChar,
            "short" | "int16" => Scalar::Short,
            "ushort" | "uint16" => Scalar::UShort,
            "int" | "int32" => Scalar::Int,
            "uint" | "uint32" => Scalar::UInt,
            "float" | "float32" => Scalar::Float,
            "double" | "float64" => Scalar::Double,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::Char | Scalar::UChar => 1,
            Scalar::Short | Scalar::UShort => 2,
            Scalar::Int | Scalar::UInt | Scalar::Float => 4,
            Scalar::Double => 8,
        }
    }
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    /// Scalar type, or `(count type, item type)` for list properties.
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct ElementDesc {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<ElementDesc>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

fn parse_header(path: &Path, data: &[u8]) -> Result<(Header, usize)> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut next_line = |pos: &mut usize| -> Result<String> {
        let start = *pos;
        while *pos < data.len() && data[*pos] != b'\n' {
            *pos += 1;
        }
        if *pos >= data.len() {
            return Err(format_err(path, "header not terminated by end_header"));
        }
        let line = std::str::from_utf8(&data[start..*pos])
            .map_err(|_| format_err(path, "header is not valid utf-8"))?
            .trim_end_matches('\r')
            .to_string();
        *pos += 1;
        line_no += 1;
        Ok(line)
    };

    if next_line(&mut pos)? != "ply" {
        return Err(format_err(path, "missing ply magic line"));
    }
    let mut format = None;
    let mut elements: Vec<ElementDesc> = Vec::new();
    loop {
        let line = next_line(&mut pos)?;
        let mut tok = line.split_ascii_whitespace();
        match tok.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some(other) => {
                        return Err(format_err(path, format!("unsupported format {other}")))
                    }
                    None => return Err(format_err(path, "format line missing type")),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| format_err(path, "element line missing name"))?
                    .to_string();
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| format_err(path, "element line missing count"))?;
                elements.push(ElementDesc { name, count, props: Vec::new() });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, "property before any element"))?;
                let first = tok
                    .next()
                    .ok_or_else(|| format_err(path, "property line missing type"))?;
                let kind = if first == "list" {
                    let count_ty = tok.next().and_then(Scalar::parse);
                    let item_ty = tok.next().and_then(Scalar::parse);
                    match (count_ty, item_ty) {
                        (Some(c), Some(i)) => PropertyKind::List(c, i),
                        _ => return Err(format_err(path, "bad list property types")),
                    }
                } else {
                    PropertyKind::Scalar(
                        Scalar::parse(first)
                            .ok_or_else(|| format_err(path, format!("unknown type {first}")))?,
                    )
                };
                let name = tok
                    .next()
                    .ok_or_else(|| format_err(path, "property line missing name"))?
                    .to_string();
                elem.props.push(Property { name, kind });
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(format_err(path, format!("unexpected header keyword {other}")))
            }
        }
    }
    let format = format.ok_or_else(|| format_err(path, "missing format line"))?;
    let _ = line_no;
    Ok((Header { format, elements }, pos))
}

/// One parsed element body: scalar property columns by name, plus list
/// property rows by name.
struct ElementData {
    scalars: Vec<(String, Vec<f64>)>,
    lists: Vec<(String, Vec<Vec<u64>>)>,
}

impl ElementData {
    fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    fn list(&self, name: &str) -> Option<&[Vec<u64>]> {
        self.lists.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

struct BinCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl BinCursor<'_> {
    fn take(&mut self, n: usize, path: &Path) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(format_err(path, "unexpected end of binary payload"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn scalar(&mut self, ty: Scalar, path: &Path) -> Result<f64> {
        let b = self.take(ty.size(), path)?;
        Ok(match ty {
            Scalar::Char => b[0] as i8 as f64,
            Scalar::UChar => b[0] as f64,
            Scalar::Short => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::UShort => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::Int => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::UInt => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::Float => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::Double => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }
}

fn read_elements(path: &Path, data: &[u8]) -> Result<Vec<(String, ElementData)>> {
    let (header, body_start) = parse_header(path, data)?;
    let mut out = Vec::new();
    match header.format {
        PlyFormat::BinaryLittleEndian => {
            let mut cur = BinCursor { data, pos: body_start };
            for elem in &header.elements {
                let mut scalars: Vec<(String, Vec<f64>)> = elem
                    .props
                    .iter()
                    .filter(|p| matches!(p.kind, PropertyKind::Scalar(_)))
                    .map(|p| (p.name.clone(), Vec::with_capacity(elem.count)))
                    .collect();
                let mut lists: Vec<(String, Vec<Vec<u64>>)> = elem
                    .props
                    .iter()
                    .filter(|p| matches!(p.kind, PropertyKind::List(_, _)))
                    .map(|p| (p.name.clone(), Vec::with_capacity(elem.count)))
                    .collect();
                for _ in 0..elem.count {
                    let mut si = 0;
                    let mut li = 0;
                    for prop in &elem.props {
                        match prop.kind {
                            PropertyKind::Scalar(ty) => {
                                let v = cur.scalar(ty, path)?;
                                scalars[si].1.push(v);
                                si += 1;
                            }
                            PropertyKind::List(cty, ity) => {
                                let n = cur.scalar(cty, path)? as usize;
                                let mut row = Vec::with_capacity(n);
                                for _ in 0..n {
                                    row.push(cur.scalar(ity, path)? as u64);
                                }
                                lists[li].1.push(row);
                                li += 1;
                            }
                        }
                    }
                }
                out.push((elem.name.clone(), ElementData { scalars, lists }));
            }
        }
        PlyFormat::Ascii => {
            let body = std::str::from_utf8(&data[body_start..])
                .map_err(|_| format_err(path, "ascii body is not valid utf-8"))?;
            let mut tokens = body.split_ascii_whitespace();
            let mut next_f64 = |what: &str| -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| format_err(path, format!("unexpected end of data ({what})")))?
                    .parse::<f64>()
                    .map_err(|_| format_err(path, format!("bad number for {what}")))
            };
            for elem in &header.elements {
                let mut scalars: Vec<(String, Vec<f64>)> = elem
                    .props
                    .iter()
                    .filter(|p| matches!(p.kind, PropertyKind::Scalar(_)))
                    .map(|p| (p.name.clone(), Vec::with_capacity(elem.count)))
                    .collect();
                let mut lists: Vec<(String, Vec<Vec<u64>>)> = elem
                    .props
                    .iter()
                    .filter(|p| matches!(p.kind, PropertyKind::List(_, _)))
                    .map(|p| (p.name.clone(), Vec::with_capacity(elem.count)))
                    .collect();
                for _ in 0..elem.count {
                    let mut si = 0;
                    let mut li = 0;
                    for prop in &elem.props {
                        match prop.kind {
                            PropertyKind::Scalar(_) => {
                                let v = next_f64(&prop.name)?;
                                scalars[si].1.push(v);
                                si += 1;
                            }
                            PropertyKind::List(_, _) => {
                                let n = next_f64(&prop.name)? as usize;
                                let mut row = Vec::with_capacity(n);
                                for _ in 0..n {
                                    row.push(next_f64(&prop.name)? as u64);
                                }
                                lists[li].1.push(row);
                                li += 1;
                            }
                        }
                    }
                }
                out.push((elem.name.clone(), ElementData { scalars, lists }));
            }
        }
    }
    Ok(out)
}

fn vertex_positions(path: &Path, vertex: &ElementData) -> Result<Vec<Point3>> {
    let (xs, ys, zs) = match (vertex.scalar("x"), vertex.scalar("y"), vertex.scalar("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(format_err(path, "vertex element lacks x/y/z properties")),
    };
    Ok(xs
        .iter()
        .zip(ys)
        .zip(zs)
        .map(|((&x, &y), &z)| Point3::new(x, y, z))
        .collect())
}

/// Reads a triangle mesh. The file must carry `vertex` and `face` elements;
/// non-triangular faces are rejected.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let elements = read_elements(path, &data)?;
    let vertex = elements
        .iter()
        .find(|(n, _)| n == "vertex")
        .map(|(_, e)| e)
        .ok_or_else(|| format_err(path, "missing vertex element"))?;
    let face = elements
        .iter()
        .find(|(n, _)| n == "face")
        .map(|(_, e)| e)
        .ok_or_else(|| format_err(path, "missing face element"))?;
    let vertices = vertex_positions(path, vertex)?;
    let rows = face
        .list("vertex_indices")
        .or_else(|| face.list("vertex_index"))
        .ok_or_else(|| format_err(path, "face element lacks vertex_indices"))?;
    let mut facets = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 3 {
            return Err(format_err(path, format!("face {i} has {} vertices, want 3", row.len())));
        }
        facets.push([row[0] as u32, row[1] as u32, row[2] as u32]);
    }
    TriMesh::new(vertices, facets)
}

/// Reads a colored point cloud. Requires `x y z red green blue` vertex
/// properties; `origin_distance` is picked up when present.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<ColoredPointCloud> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let elements = read_elements(path, &data)?;
    let vertex = elements
        .iter()
        .find(|(n, _)| n == "vertex")
        .map(|(_, e)| e)
        .ok_or_else(|| format_err(path, "missing vertex element"))?;
    let points = vertex_positions(path, vertex)?;
    let (r, g, b) = match (
        vertex.scalar("red"),
        vertex.scalar("green"),
        vertex.scalar("blue"),
    ) {
        (Some(r), Some(g), Some(b)) => (r, g, b),
        _ => return Err(format_err(path, "vertex element lacks red/green/blue properties")),
    };
    let colors: Vec<[u8; 3]> = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| [r as u8, g as u8, b as u8])
        .collect();
    let origin_distance = vertex.scalar("origin_distance").map(|d| d.to_vec());
    ColoredPointCloud::new(points, colors, origin_distance)
}

/// Writes a triangle mesh.
pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriMesh, format: PlyFormat) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(w, "ply")?;
    writeln!(
        w,
        "format {} 1.0",
        match format {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    )?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.facet_count())?;
    writeln!(w, "property list uchar uint vertex_indices")?;
    writeln!(w, "end_header")?;
    match format {
        PlyFormat::Ascii => {
            for v in mesh.vertices() {
                writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
            }
            for f in mesh.facets() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in &v.coords {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            for f in mesh.facets() {
                w.write_all(&[3u8])?;
                for idx in f {
                    w.write_all(&idx.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a colored point cloud.
pub fn write_cloud(
    path: impl AsRef<Path>,
    cloud: &ColoredPointCloud,
    format: PlyFormat,
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(w, "ply")?;
    writeln!(
        w,
        "format {} 1.0",
        match format {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    )?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "property uchar red")?;
    writeln!(w, "property uchar green")?;
    writeln!(w, "property uchar blue")?;
    if cloud.origin_distance().is_some() {
        writeln!(w, "property double origin_distance")?;
    }
    writeln!(w, "end_header")?;
    let dist = cloud.origin_distance();
    match format {
        PlyFormat::Ascii => {
            for i in 0..cloud.len() {
                let p = cloud.points()[i];
                let c = cloud.colors()[i];
                write!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
                if let Some(d) = dist {
                    write!(w, " {}", d[i])?;
                }
                writeln!(w)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for i in 0..cloud.len() {
                for c in &cloud.points()[i].coords {
                    w.write_all(&c.to_le_bytes())?;
                }
                w.write_all(&cloud.colors()[i])?;
                if let Some(d) = dist {
                    w.write_all(&d[i].to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
