//! Boundary-condition files (`biotfv-bc v1`).
//!
//! ```text
//! biotfv-bc v1
//! default dirichlet dirichlet        # <mechanics> <flow> for faces without a side override
//! north neumann dirichlet            # south | east | north | west
//! mechanics linear 0 0 0.1 0 0 -0.1  # u = c + G x  (cx cy gxx gxy gyx gyy), or: constant cx cy
//! flow constant 1                    # or: linear c gx gy
//! source-u constant 0 0              # cell source densities
//! source-p constant 0
//! manufactured                       # built-in manufactured solution: data, sources and errors
//! ```
//!
//! Data is the displacement/pressure on Dirichlet faces and the traction/outward flux on
//! Neumann faces. Omitted lines default to homogeneous Dirichlet data and zero sources.

use std::io::BufRead;

use anyhow::{anyhow, bail, Context, Result};
use biotfv_core::mesh::{BcKind, BoundarySpec, FaceCondition, Side};
use biotfv_core::mms::Manufactured;
use biotfv_core::Point;

const HEADER: &str = "biotfv-bc v1";

#[derive(Clone, Debug)]
pub struct BcFile {
    pub spec: BoundarySpec,
    /// Data and sources come from the manufactured solution.
    pub manufactured: bool,
    pub source_u: Point,
    pub source_p: f64,
}

impl Default for BcFile {
    fn default() -> Self {
        Self { spec: BoundarySpec::dirichlet(), manufactured: false, source_u: Point::zeros(), source_p: 0.0 }
    }
}

fn kind(s: &str) -> Result<BcKind> {
    match s {
        "dirichlet" | "D" => Ok(BcKind::Dirichlet),
        "neumann" | "N" => Ok(BcKind::Neumann),
        _ => bail!("unknown condition '{s}' (valid: dirichlet, neumann)"),
    }
}

fn numbers(t: &[&str], n: usize) -> Result<Vec<f64>> {
    if t.len() != n {
        bail!("expected {n} numbers, found {}", t.len());
    }
    t.iter().map(|s| s.parse::<f64>().map_err(|_| anyhow!("bad number '{s}'"))).collect()
}

pub fn read_bc<R: BufRead>(r: R) -> Result<BcFile> {
    let mut out = BcFile::default();
    let mut header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let t: Vec<&str> = content.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        let ctx = || format!("boundary file line {}", i + 1);
        if !header {
            if content.trim() != HEADER {
                bail!("{}: expected '{HEADER}'", ctx());
            }
            header = true;
            continue;
        }
        let parsed: Result<()> = (|| {
            match t[0] {
                "default" | "south" | "east" | "north" | "west" => {
                    if t.len() != 3 {
                        bail!("expected '<side> <mechanics> <flow>'");
                    }
                    let c = FaceCondition { mechanics: kind(t[1])?, flow: kind(t[2])? };
                    let side = match t[0] {
                        "south" => Side::South,
                        "east" => Side::East,
                        "north" => Side::North,
                        "west" => Side::West,
                        _ => {
                            out.spec.default = c;
                            return Ok(());
                        }
                    };
                    out.spec.sides[side.index()] = Some(c);
                }
                "mechanics" => match t.get(1) {
                    Some(&"constant") => {
                        let v = numbers(&t[2..], 2)?;
                        let c = Point::new(v[0], v[1]);
                        out.spec.mechanics_data = std::sync::Arc::new(move |_| c);
                    }
                    Some(&"linear") => {
                        let v = numbers(&t[2..], 6)?;
                        out.spec.mechanics_data = std::sync::Arc::new(move |x: Point| {
                            Point::new(v[0] + v[2] * x.x + v[3] * x.y, v[1] + v[4] * x.x + v[5] * x.y)
                        });
                    }
                    _ => bail!("expected 'mechanics constant|linear ...'"),
                },
                "flow" => match t.get(1) {
                    Some(&"constant") => {
                        let c = numbers(&t[2..], 1)?[0];
                        out.spec.flow_data = std::sync::Arc::new(move |_| c);
                    }
                    Some(&"linear") => {
                        let v = numbers(&t[2..], 3)?;
                        out.spec.flow_data = std::sync::Arc::new(move |x: Point| v[0] + v[1] * x.x + v[2] * x.y);
                    }
                    _ => bail!("expected 'flow constant|linear ...'"),
                },
                "source-u" if t.get(1) == Some(&"constant") => {
                    let v = numbers(&t[2..], 2)?;
                    out.source_u = Point::new(v[0], v[1]);
                }
                "source-p" if t.get(1) == Some(&"constant") => out.source_p = numbers(&t[2..], 1)?[0],
                "manufactured" if t.len() == 1 => {
                    out.manufactured = true;
                    let m = Manufactured::boundary();
                    out.spec.mechanics_data = m.mechanics_data;
                    out.spec.flow_data = m.flow_data;
                }
                other => bail!("unknown directive '{other}'"),
            }
            Ok(())
        })();
        parsed.with_context(ctx)?;
    }
    if !header {
        bail!("boundary file is empty; expected '{HEADER}'");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sides_and_linear_data() {
        let text = "biotfv-bc v1\n# comment\nnorth neumann dirichlet\nmechanics linear 1 2 0.5 0 0 -0.5\nflow constant 3\n";
        let bc = read_bc(text.as_bytes()).unwrap();
        assert_eq!(bc.spec.sides[Side::North.index()].unwrap().mechanics, BcKind::Neumann);
        assert_eq!((bc.spec.mechanics_data)(Point::new(2.0, 4.0)), Point::new(2.0, 0.0));
        assert_eq!((bc.spec.flow_data)(Point::new(0.3, 0.1)), 3.0);
        assert!(!bc.manufactured);
    }

    #[test]
    fn rejects_unknown_lines() {
        let e = read_bc("biotfv-bc v1\nupside dirichlet dirichlet\n".as_bytes()).unwrap_err();
        assert!(format!("{e:#}").contains("line 2"));
        assert!(read_bc("biotfv-bc v2\n".as_bytes()).is_err());
        assert!(read_bc("biotfv-bc v1\nflow linear 1 2\n".as_bytes()).is_err());
    }
}
