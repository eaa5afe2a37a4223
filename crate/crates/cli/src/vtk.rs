//! Legacy ASCII VTK export of cell data.

use std::io::Write;

use biotfv_core::mesh::MeshTriplet;

/// Polygon cells with cell-data pressure `p` and displacement `u` (interleaved).
pub fn write_vtk<W: Write>(mesh: &MeshTriplet, u: &[f64], p: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0\nbiotfv solution\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for v in &mesh.vertices {
        writeln!(w, "{:?} {:?} 0", v.x, v.y)?;
    }
    let size: usize = mesh.cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "CELLS {} {size}", mesh.num_cells())?;
    for c in &mesh.cells {
        let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{} {}", c.len(), ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.num_cells())?;
    for _ in &mesh.cells {
        writeln!(w, "7")?;
    }
    writeln!(w, "CELL_DATA {}\nSCALARS p double 1\nLOOKUP_TABLE default", mesh.num_cells())?;
    for v in p {
        writeln!(w, "{v:?}")?;
    }
    writeln!(w, "VECTORS u double")?;
    for k in 0..mesh.num_cells() {
        writeln!(w, "{:?} {:?} 0", u[2 * k], u[2 * k + 1])?;
    }
    Ok(())
}
