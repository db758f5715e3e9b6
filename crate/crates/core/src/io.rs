//! Mesh and point-cloud file formats: OBJ/OFF in, PLY/XYZ in and out.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, TriangleMesh};

fn parse_f64(tok: &str, kind: &'static str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|e| Error::format(kind, format!("{tok:?}: {e}")))
}

fn parse_usize(tok: &str, kind: &'static str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|e| Error::format(kind, format!("{tok:?}: {e}")))
}

/// Splits a polygon into a triangle fan around its first vertex.
fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

/// Wavefront OBJ. Only `v` and `f` records are used; faces with more than
/// three corners are fan-triangulated. Negative (relative) indices are accepted.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks.take(3).map(|t| parse_f64(t, "OBJ")).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::format("OBJ", format!("line {}: short vertex", lineno + 1)));
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in toks {
                    let head = t.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| Error::format("OBJ", format!("line {}: bad index {t:?}", lineno + 1)))?;
                    let resolved = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => return Err(Error::format("OBJ", "index 0 is invalid")),
                    };
                    if resolved < 0 {
                        return Err(Error::format("OBJ", format!("line {}: index out of range", lineno + 1)));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::format("OBJ", format!("line {}: face with < 3 vertices", lineno + 1)));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Object File Format (`OFF` header, counts, vertices, then `n i0 i1 ...` faces).
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut toks = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let header = toks.next().ok_or_else(|| Error::format("OFF", "empty file"))?;
    // counts may be glued to the header ("OFF8 6 0" is rare but legal)
    let first_count = match header.strip_prefix("OFF") {
        Some("") => None,
        Some(rest) => Some(rest),
        None => return Err(Error::format("OFF", "missing OFF header")),
    };
    let mut next = || toks.next().ok_or_else(|| Error::format("OFF", "unexpected end of file"));
    let nv = parse_usize(match first_count {
        Some(c) => c,
        None => next()?,
    }, "OFF")?;
    let nf = parse_usize(next()?, "OFF")?;
    let _edges = next()?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([parse_f64(next()?, "OFF")?, parse_f64(next()?, "OFF")?, parse_f64(next()?, "OFF")?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = parse_usize(next()?, "OFF")?;
        let poly: Vec<usize> = (0..k).map(|_| parse_usize(next()?, "OFF")).collect::<Result<_>>()?;
        if k < 3 {
            return Err(Error::format("OFF", "face with < 3 vertices"));
        }
        fan(&poly, &mut faces);
    }
    TriangleMesh::new(vertices, faces)
}

/// Reads an `.obj` or `.off` mesh, chosen by extension.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match extension(path).as_deref() {
        Some("obj") => parse_obj(&text),
        Some("off") => parse_off(&text),
        _ => Err(Error::format("mesh", format!("unsupported extension: {}", path.display()))),
    }
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// ASCII PLY with a single `vertex` element of `x y z` doubles.
pub fn write_ply<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property double {axis}")?;
    }
    writeln!(w, "end_header")?;
    write_xyz(cloud, w)
}

/// One `x y z` line per point.
pub fn write_xyz<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    Ok(())
}

fn parse_xyz_lines<'a>(lines: impl Iterator<Item = &'a str>, kind: &'static str) -> Result<Vec<Point3>> {
    let mut points = Vec::new();
    for line in lines {
        let mut toks = line.split_whitespace();
        let Some(x) = toks.next() else { continue };
        let y = toks.next().ok_or_else(|| Error::format(kind, "short point line"))?;
        let z = toks.next().ok_or_else(|| Error::format(kind, "short point line"))?;
        points.push([parse_f64(x, kind)?, parse_f64(y, kind)?, parse_f64(z, kind)?]);
    }
    Ok(points)
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    PointCloud::new(parse_xyz_lines(text.lines(), "XYZ")?)
}

/// ASCII PLY whose first three vertex properties are the coordinates.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::format("PLY", "missing ply magic"));
    }
    let mut count = None;
    for line in lines.by_ref() {
        let line = line.trim();
        if line.starts_with("format") && !line.contains("ascii") {
            return Err(Error::format("PLY", "only ASCII PLY is supported"));
        }
        if let Some(rest) = line.strip_prefix("element vertex") {
            count = Some(parse_usize(rest.trim(), "PLY")?);
        }
        if line == "end_header" {
            break;
        }
    }
    let count = count.ok_or_else(|| Error::format("PLY", "no vertex element"))?;
    let points = parse_xyz_lines(lines.take(count), "PLY")?;
    if points.len() != count {
        return Err(Error::format("PLY", format!("expected {count} vertices, found {}", points.len())));
    }
    PointCloud::new(points)
}

/// Reads a `.ply` or `.xyz` point cloud, chosen by extension.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match extension(path).as_deref() {
        Some("ply") => parse_ply(&text),
        Some("xyz") => parse_xyz(&text),
        _ => Err(Error::format("point cloud", format!("unsupported extension: {}", path.display()))),
    }
}

pub(crate) fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}
