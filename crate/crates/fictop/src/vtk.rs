//! Legacy ASCII VTK unstructured-grid writer for triangle meshes.

use std::io::{self, Write};

use fictop_core::mesh::Mesh;

const VTK_TRIANGLE: u8 = 5;

enum Data<'a> {
    Scalars(&'a str, &'a [f64]),
    Vectors(&'a str, &'a [f64]),
}

/// Collects named point and cell arrays, then writes one file.
pub struct VtkFile<'a> {
    mesh: &'a Mesh,
    title: String,
    point: Vec<Data<'a>>,
    cell: Vec<Data<'a>>,
}

impl<'a> VtkFile<'a> {
    pub fn new(mesh: &'a Mesh, title: &str) -> Self {
        VtkFile {
            mesh,
            title: title.lines().next().unwrap_or("").chars().take(255).collect(),
            point: Vec::new(),
            cell: Vec::new(),
        }
    }

    /// Panics if `values` does not have one entry per node.
    pub fn point_scalars(mut self, name: &'a str, values: &'a [f64]) -> Self {
        assert_eq!(values.len(), self.mesh.num_nodes(), "point array `{name}`");
        self.point.push(Data::Scalars(name, values));
        self
    }

    /// Interleaved `[x0, y0, x1, y1, ...]` nodal vectors, written with z = 0.
    pub fn point_vectors(mut self, name: &'a str, values: &'a [f64]) -> Self {
        assert_eq!(values.len(), 2 * self.mesh.num_nodes(), "point vectors `{name}`");
        self.point.push(Data::Vectors(name, values));
        self
    }

    pub fn cell_scalars(mut self, name: &'a str, values: &'a [f64]) -> Self {
        assert_eq!(values.len(), self.mesh.num_triangles(), "cell array `{name}`");
        self.cell.push(Data::Scalars(name, values));
        self
    }

    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let m = self.mesh;
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", if self.title.is_empty() { "fictop" } else { &self.title })?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", m.num_nodes())?;
        for p in m.nodes() {
            writeln!(w, "{} {} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", m.num_triangles(), 4 * m.num_triangles())?;
        for t in m.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {}", m.num_triangles())?;
        for _ in 0..m.num_triangles() {
            writeln!(w, "{VTK_TRIANGLE}")?;
        }
        if !self.point.is_empty() {
            writeln!(w, "POINT_DATA {}", m.num_nodes())?;
            for d in &self.point {
                write_data(w, d)?;
            }
        }
        if !self.cell.is_empty() {
            writeln!(w, "CELL_DATA {}", m.num_triangles())?;
            for d in &self.cell {
                write_data(w, d)?;
            }
        }
        Ok(())
    }
}

fn clean(v: f64) -> f64 {
    // readers reject nan/inf tokens
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

fn write_data<W: Write>(w: &mut W, d: &Data) -> io::Result<()> {
    match d {
        Data::Scalars(name, values) => {
            writeln!(w, "SCALARS {} double 1", sanitize(name))?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for &v in values.iter() {
                writeln!(w, "{}", clean(v))?;
            }
        }
        Data::Vectors(name, values) => {
            writeln!(w, "VECTORS {} double", sanitize(name))?;
            for c in values.chunks_exact(2) {
                writeln!(w, "{} {} 0", clean(c[0]), clean(c[1]))?;
            }
        }
    }
    Ok(())
}

/// Array names may not contain whitespace.
fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}
