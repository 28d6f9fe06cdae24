//! Legacy ASCII VTK unstructured grids.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

const VTK_TRIANGLE: u8 = 5;

/// Renders the active cells of `mesh` with optional point and cell scalars.
pub fn render(mesh: &Mesh, title: &str, point_data: &[(&str, &[f64])], cell_data: &[(&str, &[f64])]) -> Result<String> {
    for (name, v) in point_data {
        if v.len() != mesh.n_vertices() {
            return Err(Error::input(format!("point field {name} has {} values", v.len())));
        }
    }
    for (name, v) in cell_data {
        if v.len() != mesh.n_active() {
            return Err(Error::input(format!("cell field {name} has {} values", v.len())));
        }
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:e} {:e} 0", p[0], p[1]).unwrap();
    }
    let n = mesh.n_active();
    writeln!(s, "CELLS {} {}", n, 4 * n).unwrap();
    for &c in mesh.active() {
        let v = mesh.cell(c).vertices;
        writeln!(s, "3 {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {n}").unwrap();
    for _ in 0..n {
        writeln!(s, "{VTK_TRIANGLE}").unwrap();
    }
    if !cell_data.is_empty() {
        writeln!(s, "CELL_DATA {n}").unwrap();
        for (name, values) in cell_data {
            scalars(&mut s, name, values);
        }
    }
    if !point_data.is_empty() {
        writeln!(s, "POINT_DATA {}", mesh.n_vertices()).unwrap();
        for (name, values) in point_data {
            scalars(&mut s, name, values);
        }
    }
    Ok(s)
}

fn scalars(s: &mut String, name: &str, values: &[f64]) {
    let name: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for v in values {
        writeln!(s, "{v:e}").unwrap();
    }
}

pub fn write(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
) -> Result<()> {
    std::fs::write(path, render(mesh, title, point_data, cell_data)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangles() {
        let mesh = Mesh::unit_square(1).unwrap();
        let u = [0.0, 1.0, 2.0, 3.0];
        let s = render(&mesh, "t", &[("u", &u)], &[("generation", &[0.0, 0.0])]).unwrap();
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(s.contains("CELL_DATA 2\nSCALARS generation double 1"));
        assert!(s.contains("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n0e0\n1e0\n2e0\n3e0\n"));
        assert!(render(&mesh, "t", &[("u", &u[..3])], &[]).is_err());
    }
}
