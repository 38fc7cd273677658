//! Legacy ASCII VTK output for unstructured simplicial grids.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Tensor, Vector};
use crate::mesh::Mesh;

/// Named per-vertex vectors and per-cell scalars and tensors.
#[derive(Debug, Default, Clone)]
pub struct Fields<'a> {
    pub point_vectors: Vec<(&'a str, &'a [Vector])>,
    pub cell_scalars: Vec<(&'a str, &'a [f64])>,
    pub cell_tensors: Vec<(&'a str, &'a [Tensor])>,
}

fn check_lengths(mesh: &Mesh, fields: &Fields) -> Result<()> {
    let expect = |expected: usize, actual: usize| {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, actual })
        }
    };
    for (_, v) in &fields.point_vectors {
        expect(mesh.n_vertices(), v.len())?;
    }
    for (_, v) in &fields.cell_scalars {
        expect(mesh.n_cells(), v.len())?;
    }
    for (_, v) in &fields.cell_tensors {
        expect(mesh.n_cells(), v.len())?;
    }
    Ok(())
}

pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &Fields, title: &str) -> Result<()> {
    check_lengths(mesh, fields)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_vtk_to(&mut out, mesh, fields, title)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes the file body; field lengths are not checked here.
pub fn write_vtk_to<W: Write>(out: &mut W, mesh: &Mesh, fields: &Fields, title: &str) -> std::io::Result<()> {
    let d = mesh.dim();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.points() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
    }
    let nc = mesh.n_cells();
    writeln!(out)?;
    writeln!(out, "CELLS {nc} {}", nc * (d + 2))?;
    for c in 0..nc {
        let ids: Vec<String> = mesh.cell(c).iter().map(usize::to_string).collect();
        writeln!(out, "{} {}", d + 1, ids.join(" "))?;
    }
    writeln!(out)?;
    writeln!(out, "CELL_TYPES {nc}")?;
    let cell_type = if d == 2 { 5 } else { 10 };
    for _ in 0..nc {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.point_vectors.is_empty() {
        writeln!(out)?;
        writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in &fields.point_vectors {
            writeln!(out, "VECTORS {name} double")?;
            for v in *values {
                writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
            }
        }
    }
    if !fields.cell_scalars.is_empty() || !fields.cell_tensors.is_empty() {
        writeln!(out)?;
        writeln!(out, "CELL_DATA {nc}")?;
        for (name, values) in &fields.cell_scalars {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(out, "{v:.16e}")?;
            }
        }
        for (name, values) in &fields.cell_tensors {
            writeln!(out, "TENSORS {name} double")?;
            for t in *values {
                for row in t {
                    writeln!(out, "{:.16e} {:.16e} {:.16e}", row[0], row[1], row[2])?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square, FacetTag};

    fn triangle() -> Mesh {
        Mesh::from_cells(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2],
            1.0,
            |_, _| FacetTag::dirichlet(0),
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_layout() {
        let mesh = triangle();
        let zero = [[0.0; 3]; 3];
        let fields = Fields {
            point_vectors: vec![("displacement", &zero)],
            ..Fields::default()
        };
        let mut buf = Vec::new();
        write_vtk_to(&mut buf, &mesh, &fields, "t").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 20);
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        let types = lines.iter().position(|l| l.starts_with("CELL_TYPES")).unwrap();
        assert_eq!(lines[types + 1], "5");
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mesh = unit_square(2).unwrap();
        let short = [0.0; 3];
        let fields = Fields {
            cell_scalars: vec![("s", &short)],
            ..Fields::default()
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_vtk(&dir.path().join("x.vtk"), &mesh, &fields, "x"),
            Err(Error::LengthMismatch { expected: 8, actual: 3 })
        ));
        let missing = dir.path().join("no/such/dir/x.vtk");
        assert!(matches!(write_vtk(&missing, &mesh, &Fields::default(), "x"), Err(Error::Io { .. })));
    }
}
