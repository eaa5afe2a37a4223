use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{centroid, MeshTriplet};
use crate::{Error, Point, Result};

/// The three grid families of the convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridType {
    /// Cartesian squares.
    A,
    /// Cartesian squares bisected along one diagonal.
    B,
    /// Polygonal dual of the type-B triangulation.
    C,
}

impl GridType {
    pub const ALL: [GridType; 3] = [GridType::A, GridType::B, GridType::C];
}

impl fmt::Display for GridType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for GridType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "A" | "a" => Ok(GridType::A),
            "B" | "b" => Ok(GridType::B),
            "C" | "c" => Ok(GridType::C),
            other => Err(format!("unknown grid type '{other}' (valid: A, B, C)")),
        }
    }
}

fn lattice(n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    (0..=n)
        .flat_map(|j| (0..=n).map(move |i| Point::new(i as f64 * h, j as f64 * h)))
        .collect()
}

/// `n × n` unit squares on the unit square.
pub fn build_cartesian(n: usize) -> MeshTriplet {
    assert!(n >= 1, "n must be positive");
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let cells = (0..n)
        .flat_map(|j| (0..n).map(move |i| vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]))
        .collect();
    MeshTriplet::from_cells(lattice(n), cells).expect("Cartesian lattice is valid")
}

/// `2n²` triangles: every lattice square split along its (i,j)–(i+1,j+1) diagonal.
pub fn build_triangular(n: usize) -> MeshTriplet {
    assert!(n >= 1, "n must be positive");
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    MeshTriplet::from_cells(lattice(n), cells).expect("triangulated lattice is valid")
}

/// Median-dual polygonal grid of a triangulation: one cell per primal vertex.
///
/// Dual vertices are triangle centroids, midpoints of boundary edges and the
/// primal boundary vertices themselves, which close the boundary cells.
pub fn build_dual(tri: &MeshTriplet) -> Result<MeshTriplet> {
    if tri.cells.iter().any(|c| c.len() != 3) {
        return Err(Error::Mesh("dual construction needs a triangulation".into()));
    }
    let nt = tri.num_cells();
    let mut points: Vec<Point> = (0..nt).map(|t| centroid(&tri.cell_points(t))).collect();

    let mut edge_mid: HashMap<usize, usize> = HashMap::new();
    let mut corner: HashMap<usize, usize> = HashMap::new();
    for (f, face) in tri.faces.iter().enumerate() {
        if face.is_boundary() {
            let [a, b] = face.vertices;
            edge_mid.insert(f, points.len());
            points.push((tri.vertices[a] + tri.vertices[b]) * 0.5);
        }
    }
    for v in 0..tri.num_vertices() {
        if tri.is_boundary_vertex(v) {
            corner.insert(v, points.len());
            points.push(tri.vertices[v]);
        }
    }

    // (v, successor of v in a triangle loop) -> triangle
    let mut next_tri: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, lp) in tri.cells.iter().enumerate() {
        for j in 0..3 {
            next_tri.insert((lp[j], lp[(j + 1) % 3]), t);
        }
    }
    let succ = |t: usize, v: usize| {
        let lp = &tri.cells[t];
        let j = lp.iter().position(|&x| x == v).unwrap();
        (lp[(j + 1) % 3], lp[(j + 2) % 3])
    };
    let face_of = |a: usize, b: usize| {
        tri.vertex_faces[a]
            .iter()
            .copied()
            .find(|&f| tri.faces[f].vertices.contains(&b))
            .unwrap()
    };

    let mut cells = Vec::with_capacity(tri.num_vertices());
    for v in 0..tri.num_vertices() {
        let incident = &tri.vertex_cells[v];
        // Start at a triangle whose clockwise edge (v, a) is on the boundary, if any.
        let start = incident
            .iter()
            .copied()
            .find(|&t| {
                let (a, _) = succ(t, v);
                !next_tri.contains_key(&(a, v))
            })
            .unwrap_or(incident[0]);
        let mut ring = vec![start];
        let mut t = start;
        loop {
            let (_, b) = succ(t, v);
            match next_tri.get(&(v, b)) {
                Some(&nt) if nt != start => {
                    ring.push(nt);
                    t = nt;
                }
                _ => break,
            }
        }
        if ring.len() != incident.len() {
            return Err(Error::Mesh(format!("vertex {v} has a non-manifold fan")));
        }
        let loop_pts: Vec<usize> = if let Some(&c) = corner.get(&v) {
            let (a, _) = succ(start, v);
            let (_, b) = succ(*ring.last().unwrap(), v);
            let mut lp = vec![c, edge_mid[&face_of(v, a)]];
            lp.extend(&ring);
            lp.push(edge_mid[&face_of(v, b)]);
            lp
        } else {
            ring
        };
        cells.push(loop_pts);
    }
    let dual = MeshTriplet::from_cells(points, cells)?;
    for k in 0..dual.num_cells() {
        if super::signed_area(&dual.cell_points(k)) <= 0.0 {
            return Err(Error::Mesh(format!("dual cell {k} is degenerate")));
        }
    }
    Ok(dual)
}

impl GridType {
    /// Unperturbed grid of this family at `n` lattice cells per axis.
    pub fn build(self, n: usize) -> Result<MeshTriplet> {
        match self {
            GridType::A => Ok(build_cartesian(n)),
            GridType::B => Ok(build_triangular(n)),
            GridType::C => build_dual(&build_triangular(n)),
        }
    }

    /// Perturbed grid of this family; type C perturbs the primal triangulation.
    pub fn build_perturbed(self, n: usize, amplitude: f64, seed: u64) -> Result<MeshTriplet> {
        match self {
            GridType::A => super::perturb(&build_cartesian(n), amplitude, seed),
            GridType::B => super::perturb(&build_triangular(n), amplitude, seed),
            GridType::C => build_dual(&super::perturb(&build_triangular(n), amplitude, seed)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(m: &MeshTriplet) -> (usize, usize, usize) {
        (m.num_cells(), m.num_faces(), m.num_vertices())
    }

    #[test]
    fn cartesian_counts() {
        assert_eq!(counts(&build_cartesian(1)), (1, 4, 4));
        assert_eq!(counts(&build_cartesian(2)), (4, 12, 9));
        assert_eq!(counts(&build_cartesian(4)), (16, 40, 25));
        for n in 1..7 {
            assert_eq!(build_cartesian(n).num_faces(), 2 * n * (n + 1));
        }
    }

    #[test]
    fn triangular_counts() {
        assert_eq!(counts(&build_triangular(1)), (2, 5, 4));
        assert_eq!(counts(&build_triangular(2)), (8, 16, 9));
        for n in 1..6 {
            let m = build_triangular(n);
            for f in &m.faces {
                assert_eq!(f.cells.len(), if f.side.is_some() { 1 } else { 2 });
            }
        }
    }

    #[test]
    fn dual_of_triangular() {
        let d = build_dual(&build_triangular(2)).unwrap();
        assert_eq!(d.num_cells(), 9);
        let area: f64 = (0..9).map(|k| super::super::signed_area(&d.cell_points(k))).sum();
        assert!((area - 1.0).abs() < 1e-14);
        // every boundary face is on a side of the unit square
        assert!(d.faces.iter().filter(|f| f.is_boundary()).all(|f| f.side.is_some()));
    }

    #[test]
    fn grid_type_parse() {
        assert_eq!("B".parse::<GridType>().unwrap(), GridType::B);
        let err = "X".parse::<GridType>().unwrap_err();
        assert!(err.contains("A, B, C"));
    }
}
