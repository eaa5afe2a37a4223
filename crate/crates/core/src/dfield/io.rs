use std::io::{BufRead, Write};

use super::CellField;
use crate::{Error, Result};

const HEADER: &str = "biotfv-field v1";

/// Writes a cell field: header, `cell-scalar <n>` or `cell-vector <n>`, one line per cell.
pub fn write_field<W: Write>(field: &CellField, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    let kind = if field.ncomp() == 1 { "cell-scalar" } else { "cell-vector" };
    writeln!(w, "{kind} {}", field.num_cells())?;
    for k in 0..field.num_cells() {
        let s: Vec<String> = field.get(k).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(r: R) -> Result<CellField> {
    let mut lines = r.lines().enumerate();
    let mut next = || -> Result<(usize, String)> {
        let (i, l) = lines.next().ok_or_else(|| Error::parse(0, "unexpected end of file"))?;
        Ok((i + 1, l?))
    };
    let (ln, header) = next()?;
    if header.trim() != HEADER {
        return Err(Error::parse(ln, format!("expected '{HEADER}'")));
    }
    let (ln, kind) = next()?;
    let mut it = kind.split_whitespace();
    let ncomp = match it.next() {
        Some("cell-scalar") => 1,
        Some("cell-vector") => 2,
        _ => return Err(Error::parse(ln, "expected 'cell-scalar' or 'cell-vector'")),
    };
    let n: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(ln, "missing cell count"))?;
    let mut values = Vec::with_capacity(n * ncomp);
    for _ in 0..n {
        let (ln, s) = next()?;
        let row: Vec<f64> = s
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(ln, "bad value"))?;
        if row.len() != ncomp {
            return Err(Error::parse(ln, format!("expected {ncomp} values")));
        }
        values.extend(row);
    }
    Ok(if ncomp == 1 { CellField::scalar(values) } else { CellField::vector(values) })
}
