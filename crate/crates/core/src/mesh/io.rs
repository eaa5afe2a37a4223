use std::io::{BufRead, Write};

use super::MeshTriplet;
use crate::{Error, Point, Result};

const HEADER: &str = "biotfv-mesh v1";

/// Writes vertices and cell loops; faces are re-derived on load.
///
/// Coordinates use the shortest round-trip representation, so a reload is exact.
pub fn write_mesh<W: Write>(mesh: &MeshTriplet, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{}", mesh.num_vertices())?;
    for p in &mesh.vertices {
        writeln!(w, "{:?} {:?}", p.x, p.y)?;
    }
    writeln!(w, "{}", mesh.num_cells())?;
    for lp in &mesh.cells {
        let s: Vec<String> = lp.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<MeshTriplet> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)))
        .filter(|l| l.as_ref().map_or(true, |(_, s)| !s.trim().is_empty()));
    let mut next = |what: &str| -> Result<(usize, String)> {
        lines.next().transpose()?.ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
    };
    let (ln, header) = next("header")?;
    if header.trim() != HEADER {
        return Err(Error::parse(ln, format!("expected '{HEADER}'")));
    }
    let count = |(ln, s): (usize, String)| -> Result<usize> {
        s.trim().parse().map_err(|_| Error::parse(ln, "expected a count"))
    };
    let nv = count(next("vertex count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, s) = next("vertex")?;
        let xy: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(ln, "bad coordinate"))?;
        if xy.len() != 2 {
            return Err(Error::parse(ln, "expected 'x y'"));
        }
        vertices.push(Point::new(xy[0], xy[1]));
    }
    let nc = count(next("cell count")?)?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, s) = next("cell")?;
        let lp: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(ln, "bad vertex index"))?;
        cells.push(lp);
    }
    MeshTriplet::from_cells(vertices, cells)
}
