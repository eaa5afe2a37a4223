//! The mesh triplet: cells, faces and vertices with their adjacency.
//!
//! Cells are counter-clockwise vertex loops. Local face `j` of a cell joins
//! loop entries `j` and `j + 1`; faces are numbered in order of first
//! appearance while scanning the cells.

mod boundary;
mod generators;
mod geometry;
mod io;
mod perturb;

use std::collections::HashMap;

pub use boundary::{BcKind, BoundaryData, BoundarySpec, FaceCondition, ScalarData, VectorData};
pub use generators::{build_cartesian, build_dual, build_triangular, GridType};
pub use geometry::{Geometry, Quadrature, QuadratureRule, Subcell, Subface};
pub use io::{read_mesh, write_mesh};
pub use perturb::perturb;

use crate::{Error, Point, Result};

/// Side of the unit square a boundary face lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    South,
    East,
    North,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    /// Adjacent cells in ascending order; the first one orients the face.
    pub cells: Vec<usize>,
    /// Unit-square side for boundary faces that lie on one.
    pub side: Option<Side>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }

    /// The orientation cell (lowest adjacent cell id).
    pub fn owner(&self) -> usize {
        self.cells[0]
    }

    /// The cell across the face from `cell`, if any.
    pub fn other(&self, cell: usize) -> Option<usize> {
        self.cells.iter().copied().find(|&c| c != cell)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshTriplet {
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// `cell_faces[k][j]` joins `cells[k][j]` and `cells[k][j + 1]`.
    pub cell_faces: Vec<Vec<usize>>,
    pub vertex_cells: Vec<Vec<usize>>,
    pub vertex_faces: Vec<Vec<usize>>,
}

const SIDE_TOL: f64 = 1e-12;

fn side_of(a: &Point, b: &Point) -> Option<Side> {
    let on = |x: f64, v: f64| (x - v).abs() < SIDE_TOL;
    if on(a.y, 0.0) && on(b.y, 0.0) {
        Some(Side::South)
    } else if on(a.x, 1.0) && on(b.x, 1.0) {
        Some(Side::East)
    } else if on(a.y, 1.0) && on(b.y, 1.0) {
        Some(Side::North)
    } else if on(a.x, 0.0) && on(b.x, 0.0) {
        Some(Side::West)
    } else {
        None
    }
}

pub(crate) fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

pub(crate) fn centroid(pts: &[Point]) -> Point {
    let n = pts.len();
    let area = signed_area(pts);
    let mut c = Point::zeros();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        c += (a + b) * (a.x * b.y - b.x * a.y);
    }
    c / (6.0 * area)
}

/// True if every fan triangle (center, v_j, v_{j+1}) is positively oriented.
pub(crate) fn is_star_shaped(pts: &[Point]) -> bool {
    if signed_area(pts) <= 0.0 {
        return false;
    }
    let c = centroid(pts);
    let n = pts.len();
    (0..n).all(|i| {
        let (a, b) = (pts[i] - c, pts[(i + 1) % n] - c);
        a.x * b.y - a.y * b.x > 0.0
    })
}

impl MeshTriplet {
    /// Derives faces and adjacency from counter-clockwise cell loops.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let nv = vertices.len();
        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for (k, lp) in cells.iter().enumerate() {
            if lp.len() < 3 {
                return Err(Error::Mesh(format!("cell {k} has fewer than 3 vertices")));
            }
            if let Some(&v) = lp.iter().find(|&&v| v >= nv) {
                return Err(Error::Mesh(format!("cell {k} references missing vertex {v}")));
            }
            let mut fl = Vec::with_capacity(lp.len());
            for j in 0..lp.len() {
                let (a, b) = (lp[j], lp[(j + 1) % lp.len()]);
                if a == b {
                    return Err(Error::Mesh(format!("cell {k} repeats vertex {a}")));
                }
                let key = (a.min(b), a.max(b));
                let f = *lookup.entry(key).or_insert_with(|| {
                    faces.push(Face { vertices: [a, b], cells: vec![], side: None });
                    faces.len() - 1
                });
                let face = &mut faces[f];
                if face.cells.contains(&k) {
                    return Err(Error::Mesh(format!("cell {k} uses face {f} twice")));
                }
                if !face.cells.is_empty() && face.vertices != [b, a] {
                    return Err(Error::Mesh(format!("face {f} is not consistently oriented")));
                }
                face.cells.push(k);
                if face.cells.len() > 2 {
                    return Err(Error::Mesh(format!("face {f} has more than two cells")));
                }
                fl.push(f);
            }
            cell_faces.push(fl);
        }
        for face in &mut faces {
            face.cells.sort_unstable();
            if face.is_boundary() {
                face.side = side_of(&vertices[face.vertices[0]], &vertices[face.vertices[1]]);
            }
        }
        let mut vertex_cells = vec![Vec::new(); nv];
        for (k, lp) in cells.iter().enumerate() {
            for &v in lp {
                vertex_cells[v].push(k);
            }
        }
        let mut vertex_faces = vec![Vec::new(); nv];
        for (f, face) in faces.iter().enumerate() {
            for &v in &face.vertices {
                vertex_faces[v].push(f);
            }
        }
        let mesh = Self { vertices, cells, faces, cell_faces, vertex_cells, vertex_faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, k: usize) -> Vec<Point> {
        self.cells[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_faces[v].iter().any(|&f| self.faces[f].is_boundary())
    }

    /// Checks orientation, star-shapedness and that the boundary is a closed loop.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.num_cells() {
            let pts = self.cell_points(k);
            if signed_area(&pts) <= 0.0 {
                return Err(Error::Mesh(format!("cell {k} is not counter-clockwise")));
            }
            if !is_star_shaped(&pts) {
                return Err(Error::NotStarShaped { cell: k });
            }
        }
        for (v, fs) in self.vertex_faces.iter().enumerate() {
            if fs.is_empty() {
                return Err(Error::Mesh(format!("vertex {v} is not used by any cell")));
            }
            let nb = fs.iter().filter(|&&f| self.faces[f].is_boundary()).count();
            if nb != 0 && nb != 2 {
                return Err(Error::Mesh(format!("vertex {v} touches {nb} boundary faces")));
            }
        }
        Ok(())
    }

    /// Uniformly scaled copy (used for scale-invariance checks).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_cells(self.vertices.iter().map(|p| p * c).collect(), self.cells.clone())
    }
}
