//! Triangular meshes and the finite element representation of Matérn
//! fields.

mod fem;
mod io;
mod lattice;
mod mesh;

pub use fem::{fem_matrices, kappa_for_range, practical_range, spde_precision, SpdeOperator};
pub use io::{mesh_from_str, mesh_to_string, read_mesh, write_mesh};
pub use lattice::{project_many, project_to_lattice, Lattice};
pub use mesh::{build_mesh, build_mesh_with_report, refine_longest_edge, MeshReport, Point, TriMesh};
