//! Legacy VTK ASCII writers (unstructured grid). Output is byte-stable for
//! a fixed input, which keeps golden-file tests meaningful.

use crate::error::Result;
use crate::fields::DiscreteState;
use crate::mesh::SimplicialMesh;
use crate::scenarios::SingularSet;
use std::fmt::Write as _;
use std::path::Path;

pub fn vtk_string(mesh: &SimplicialMesh, state: &DiscreteState, title: &str) -> String {
    let dim = mesh.dim();
    let vpe = dim + 1;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{title}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for i in 0..mesh.n_nodes() {
        let p = mesh.node3(i);
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }

    let ne = mesh.n_elements();
    let _ = writeln!(out, "CELLS {} {}", ne, ne * (vpe + 1));
    for e in 0..ne {
        let _ = write!(out, "{vpe}");
        for v in mesh.element(e) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let cell_type = if dim == 2 { 5 } else { 10 }; // triangle / tetra
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{cell_type}");
    }

    let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
    out.push_str("SCALARS s double 1\nLOOKUP_TABLE default\n");
    for v in &state.s.0 {
        let _ = writeln!(out, "{v}");
    }
    out.push_str("VECTORS director double\n");
    for n in &state.n.0 {
        let _ = writeln!(out, "{} {} {}", n[0], n[1], n[2]);
    }
    out.push_str("TENSORS u double\n");
    for u in &state.u.0 {
        for i in 0..3 {
            for j in 0..3 {
                if j > 0 {
                    out.push(' ');
                }
                let v = if i < dim && j < dim { u.get(i, j) } else { 0.0 };
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Writes the mesh with point data `s` (scalar), `director` (leading
/// eigenvector of `Θ`), and the tensor `U`.
pub fn write_vtk(mesh: &SimplicialMesh, state: &DiscreteState, path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, state, "uniflow state"))?;
    Ok(())
}

/// Writes an extracted iso-set as line segments (2-D) or triangles (3-D).
pub fn write_isosurface_vtk(set: &SingularSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nuniflow iso-surface\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let (points_per_cell, cell_type, n_cells) = if set.triangles.is_empty() {
        (2usize, 3u32, set.segments.len()) // VTK_LINE
    } else {
        (3usize, 5u32, set.triangles.len()) // VTK_TRIANGLE
    };
    let n_points = n_cells * points_per_cell;
    let _ = writeln!(out, "POINTS {n_points} double");
    if points_per_cell == 2 {
        for seg in &set.segments {
            for p in seg {
                let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
            }
        }
    } else {
        for tri in &set.triangles {
            for p in tri {
                let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
            }
        }
    }
    let _ = writeln!(out, "CELLS {} {}", n_cells, n_cells * (points_per_cell + 1));
    for c in 0..n_cells {
        let _ = write!(out, "{points_per_cell}");
        for k in 0..points_per_cell {
            let _ = write!(out, " {}", c * points_per_cell + k);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        let _ = writeln!(out, "{cell_type}");
    }
    std::fs::write(path, out)?;
    Ok(())
}
