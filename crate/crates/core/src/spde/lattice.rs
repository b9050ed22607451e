use super::TriMesh;
use crate::{Error, Result};

/// Regular lattice of cell centres over the mesh bounding box.
///
/// `values[j * nx + i]` is the value at cell `(i, j)`; cells outside the
/// mesh are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub values: Vec<Option<f64>>,
}

impl Lattice {
    pub fn cell_centre(&self, i: usize, j: usize) -> [f64; 2] {
        cell_centre(self.lower, self.upper, self.nx, self.ny, i, j)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.nx + i]
    }
}

fn cell_centre(lower: [f64; 2], upper: [f64; 2], nx: usize, ny: usize, i: usize, j: usize) -> [f64; 2] {
    [
        lower[0] + (upper[0] - lower[0]) * (i as f64 + 0.5) / nx as f64,
        lower[1] + (upper[1] - lower[1]) * (j as f64 + 0.5) / ny as f64,
    ]
}

/// Piecewise-linear interpolation of vertex values onto a `resolution ×
/// resolution` lattice covering the mesh bounding box.
pub fn project_to_lattice(mesh: &TriMesh, values: &[f64], resolution: usize) -> Result<Lattice> {
    project_many(mesh, &[values], resolution).map(|mut v| v.remove(0))
}

/// Projects several vertex fields sharing one point location pass.
pub fn project_many(mesh: &TriMesh, fields: &[&[f64]], resolution: usize) -> Result<Vec<Lattice>> {
    if resolution == 0 {
        return Err(Error::InvalidSpec("lattice resolution must be positive".into()));
    }
    if let Some(f) = fields.iter().find(|f| f.len() != mesh.n_vertices()) {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            found: f.len(),
        });
    }
    let (lower, upper) = mesh.bounding_box();
    let n = resolution;
    let mut out: Vec<Lattice> = fields
        .iter()
        .map(|_| Lattice {
            nx: n,
            ny: n,
            lower,
            upper,
            values: vec![None; n * n],
        })
        .collect();
    let mut last = 0usize;
    for j in 0..n {
        for i in 0..n {
            let p = cell_centre(lower, upper, n, n, i, j);
            // neighbouring cells usually fall in the same triangle
            let hit = {
                let w = mesh.barycentric(last, p);
                if w.iter().all(|&x| x >= -1e-12) {
                    Some((last, w))
                } else {
                    mesh.locate(p)
                }
            };
            if let Some((t, w)) = hit {
                last = t;
                let tri = mesh.triangles()[t];
                for (lat, f) in out.iter_mut().zip(fields) {
                    lat.values[j * n + i] = Some(tri.iter().zip(w).map(|(&v, w)| f[v] * w).sum());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fields_are_reproduced() {
        let mesh = TriMesh::regular_grid(4, 3, [0.0, 0.0], [3.0, 2.0]).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|v| 1.0 + 2.0 * v[0] - v[1]).collect();
        let lat = project_to_lattice(&mesh, &f, 7).unwrap();
        for j in 0..7 {
            for i in 0..7 {
                let p = lat.cell_centre(i, j);
                let v = lat.get(i, j).unwrap();
                assert!((v - (1.0 + 2.0 * p[0] - p[1])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cells_outside_mesh_are_missing() {
        let mesh = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let lat = project_to_lattice(&mesh, &[1.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(lat.get(3, 3), None);
        assert_eq!(lat.get(0, 0), Some(1.0));
    }
}
