//! File output: legacy VTK, MatrixMarket and CSV tables.
//!
//! VTK files are ASCII `UNSTRUCTURED_GRID` datasets. Cells are VTK type 5
//! (triangle) or 9 (quad); every point field is written as `SCALARS <name>
//! double 1` under `POINT_DATA`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::fem::SparseSpd;
use crate::mesh::{CellKind, SurfaceMesh};

/// Legacy ASCII VTK text for `mesh` with the given point fields.
pub fn vtk_string(mesh: &SurfaceMesh, fields: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("fraclb surface solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.n_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    let nn = mesh.cell_kind().nodes();
    let _ = writeln!(out, "CELLS {} {}", mesh.n_cells(), mesh.n_cells() * (nn + 1));
    for cell in mesh.cells() {
        out.push_str(&nn.to_string());
        for v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_cells());
    let code = match mesh.cell_kind() {
        CellKind::Triangle => 5,
        CellKind::Quad => 9,
    };
    for _ in 0..mesh.n_cells() {
        let _ = writeln!(out, "{code}");
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.n_vertices());
        for (name, values) in fields {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(out, "{v:.17e}");
            }
        }
    }
    out
}

pub fn write_vtk(path: &Path, mesh: &SurfaceMesh, fields: &[(&str, &[f64])]) -> Result<()> {
    fs::write(path, vtk_string(mesh, fields))?;
    Ok(())
}

/// MatrixMarket `coordinate real general` text (1-based indices).
pub fn matrix_market_string(m: &SparseSpd) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.n, m.n, m.nnz());
    for i in 0..m.n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let _ = writeln!(out, "{} {} {:.17e}", i + 1, m.col_idx[k] + 1, m.values[k]);
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &SparseSpd) -> Result<()> {
    fs::write(path, matrix_market_string(m))?;
    Ok(())
}

/// Comma-separated table with a header row.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Formats a float for CSV output (shortest round-trip representation).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::Lift;
    use crate::mesh::InitialMesh;

    #[test]
    fn vtk_layout() {
        let mesh = SurfaceMesh::sphere_at_level(InitialMesh::CubeQuads, 1, &Lift::unit_sphere()).unwrap();
        let u = vec![2.0; mesh.n_vertices()];
        let text = vtk_string(&mesh, &[("u", &u)]);
        assert!(text.contains("POINTS 26 double"));
        assert!(text.contains("CELLS 24 120"));
        assert!(text.contains("SCALARS u double 1"));
        let tail: Vec<&str> = text.lines().rev().take(26).collect();
        assert!(tail.iter().all(|l| l.parse::<f64>().unwrap() == 2.0));
    }

    #[test]
    fn matrix_market_header() {
        let m = SparseSpd {
            n: 2,
            row_ptr: vec![0, 2, 3],
            col_idx: vec![0, 1, 1],
            values: vec![2.0, -1.0, 3.0],
        };
        let text = matrix_market_string(&m);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
        assert_eq!(lines.next(), Some("2 2 3"));
        assert_eq!(lines.next(), Some("1 1 2.00000000000000000e0"));
    }
}
