use std::fmt::Write as _;
use std::path::Path;

use super::TriMesh;
use crate::{Error, Result};

/// Plain-text mesh format: vertex count, one `x y` line per vertex, triangle
/// count, one line of three 1-based vertex indices per triangle.
pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    writeln!(s, "{}", mesh.n_vertices()).unwrap();
    for v in mesh.vertices() {
        writeln!(s, "{} {}", v[0], v[1]).unwrap();
    }
    writeln!(s, "{}", mesh.triangles().len()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

pub fn mesh_from_str(text: &str) -> Result<TriMesh> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("unexpected end of mesh file reading {what}")));
    let count = |line: &str| line.parse::<usize>().map_err(|e| Error::Parse(format!("bad count {line:?}: {e}")));

    let nv = count(next("vertex count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = next("vertex")?;
        let xy: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad coordinate {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if xy.len() != 2 {
            return Err(Error::Parse(format!("vertex line {line:?} needs two coordinates")));
        }
        vertices.push([xy[0], xy[1]]);
    }
    let nt = count(next("triangle count")?)?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let line = next("triangle")?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::Parse(format!("bad vertex index {t:?}"))),
            })
            .collect::<Result<_>>()?;
        if idx.len() != 3 {
            return Err(Error::Parse(format!("triangle line {line:?} needs three indices")));
        }
        triangles.push([idx[0], idx[1], idx[2]]);
    }
    TriMesh::new(vertices, triangles)
}

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    mesh_from_str(&std::fs::read_to_string(path)?)
}
