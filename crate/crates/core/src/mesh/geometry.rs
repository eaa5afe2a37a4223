use super::{centroid, signed_area, MeshTriplet};
use crate::{Error, Point, Result};

/// Subcell `(K, s)`: the quadrilateral `x_K`, previous face midpoint, `s`, next face midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Subcell {
    pub cell: usize,
    pub vertex: usize,
    /// Position of `vertex` in the cell loop.
    pub local: usize,
    /// Faces of the cell meeting at `vertex` (incoming, outgoing in loop order).
    pub faces: [usize; 2],
    /// The matching subfaces.
    pub subfaces: [usize; 2],
    pub area: f64,
}

/// Subface `(s, σ)`: the half of face σ between vertex `s` and the face midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Subface {
    pub face: usize,
    pub vertex: usize,
    pub length: f64,
    /// Endpoint at the vertex.
    pub start: Point,
    /// Endpoint at the face midpoint.
    pub end: Point,
    pub center: Point,
}

#[derive(Clone, Debug)]
pub struct Geometry {
    pub cell_area: Vec<f64>,
    pub cell_center: Vec<Point>,
    pub cell_diameter: Vec<f64>,
    pub face_length: Vec<f64>,
    pub face_midpoint: Vec<Point>,
    /// Unit normal pointing out of the face's owner cell.
    pub face_normal: Vec<Point>,
    pub face_owner: Vec<usize>,
    /// `d_{K,σ}` for each cell in `faces[f].cells` (same order).
    pub face_distance: Vec<Vec<f64>>,
    pub subcells: Vec<Subcell>,
    /// Subcells of each cell, aligned with the cell's vertex loop.
    pub cell_subcells: Vec<Vec<usize>>,
    pub vertex_subcells: Vec<Vec<usize>>,
    pub subfaces: Vec<Subface>,
    /// Subfaces of each face, aligned with `faces[f].vertices`.
    pub face_subfaces: Vec<[usize; 2]>,
    pub vertex_subfaces: Vec<Vec<usize>>,
    /// Half-subfaces (`2·subcell + j`) touching each subface, ascending by cell id.
    pub subface_halves: Vec<Vec<usize>>,
    /// Boundary subfaces in slot order.
    pub boundary_subfaces: Vec<usize>,
    pub subface_slot: Vec<Option<usize>>,
    /// Maximum cell diameter.
    pub h: f64,
}

impl Geometry {
    pub fn new(mesh: &MeshTriplet) -> Result<Self> {
        let nc = mesh.num_cells();
        let mut cell_area = Vec::with_capacity(nc);
        let mut cell_center = Vec::with_capacity(nc);
        let mut cell_diameter = Vec::with_capacity(nc);
        for k in 0..nc {
            let pts = mesh.cell_points(k);
            if !super::is_star_shaped(&pts) {
                return Err(Error::NotStarShaped { cell: k });
            }
            cell_area.push(signed_area(&pts));
            cell_center.push(centroid(&pts));
            let mut d: f64 = 0.0;
            for a in &pts {
                for b in &pts {
                    d = d.max((a - b).norm());
                }
            }
            cell_diameter.push(d);
        }

        let nf = mesh.num_faces();
        let mut face_length = Vec::with_capacity(nf);
        let mut face_midpoint = Vec::with_capacity(nf);
        let mut face_normal = Vec::with_capacity(nf);
        let mut face_owner = Vec::with_capacity(nf);
        let mut face_distance = Vec::with_capacity(nf);
        let mut subfaces = Vec::with_capacity(2 * nf);
        let mut face_subfaces = Vec::with_capacity(nf);
        for (f, face) in mesh.faces.iter().enumerate() {
            let [a, b] = face.vertices.map(|v| mesh.vertices[v]);
            let len = (b - a).norm();
            let mid = (a + b) * 0.5;
            let owner = face.owner();
            // Face vertices follow the owner's loop, so the outward normal is the right-hand one.
            let (fa, fb) = oriented_in(mesh, owner, f);
            let t = (mesh.vertices[fb] - mesh.vertices[fa]) / len;
            let n = Point::new(t.y, -t.x);
            face_length.push(len);
            face_midpoint.push(mid);
            face_normal.push(n);
            face_owner.push(owner);
            let mut dist = Vec::with_capacity(face.cells.len());
            for &k in &face.cells {
                let sign = if k == owner { 1.0 } else { -1.0 };
                let d = sign * (mid - cell_center[k]).dot(&n);
                if d <= 0.0 {
                    return Err(Error::NotStarShaped { cell: k });
                }
                dist.push(d);
            }
            face_distance.push(dist);
            let mut pair = [0; 2];
            for (i, &v) in face.vertices.iter().enumerate() {
                let start = mesh.vertices[v];
                pair[i] = subfaces.len();
                subfaces.push(Subface {
                    face: f,
                    vertex: v,
                    length: 0.5 * len,
                    start,
                    end: mid,
                    center: (start + mid) * 0.5,
                });
            }
            face_subfaces.push(pair);
        }

        let subface_at = |f: usize, v: usize| {
            let i = mesh.faces[f].vertices.iter().position(|&x| x == v).unwrap();
            face_subfaces[f][i]
        };

        let mut subcells = Vec::new();
        let mut cell_subcells = Vec::with_capacity(nc);
        let mut vertex_subcells = vec![Vec::new(); mesh.num_vertices()];
        let mut subface_halves = vec![Vec::new(); subfaces.len()];
        for (k, lp) in mesh.cells.iter().enumerate() {
            let m = lp.len();
            let mut list = Vec::with_capacity(m);
            for j in 0..m {
                let v = lp[j];
                let fin = mesh.cell_faces[k][(j + m - 1) % m];
                let fout = mesh.cell_faces[k][j];
                let quad = [cell_center[k], face_midpoint[fin], mesh.vertices[v], face_midpoint[fout]];
                let area = signed_area(&quad);
                if area <= 0.0 {
                    return Err(Error::NotStarShaped { cell: k });
                }
                let sc = subcells.len();
                let sfs = [subface_at(fin, v), subface_at(fout, v)];
                subface_halves[sfs[0]].push(2 * sc);
                subface_halves[sfs[1]].push(2 * sc + 1);
                subcells.push(Subcell { cell: k, vertex: v, local: j, faces: [fin, fout], subfaces: sfs, area });
                vertex_subcells[v].push(sc);
                list.push(sc);
            }
            cell_subcells.push(list);
        }
        for halves in &mut subface_halves {
            halves.sort_by_key(|&hf| subcells[hf / 2].cell);
        }
        let mut vertex_subfaces = vec![Vec::new(); mesh.num_vertices()];
        for (i, sf) in subfaces.iter().enumerate() {
            vertex_subfaces[sf.vertex].push(i);
        }
        let mut boundary_subfaces = Vec::new();
        let mut subface_slot = vec![None; subfaces.len()];
        for (i, sf) in subfaces.iter().enumerate() {
            if mesh.faces[sf.face].is_boundary() {
                subface_slot[i] = Some(boundary_subfaces.len());
                boundary_subfaces.push(i);
            }
        }
        let h = cell_diameter.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(Self {
            cell_area,
            cell_center,
            cell_diameter,
            face_length,
            face_midpoint,
            face_normal,
            face_owner,
            face_distance,
            subcells,
            cell_subcells,
            vertex_subcells,
            subfaces,
            face_subfaces,
            vertex_subfaces,
            subface_halves,
            boundary_subfaces,
            subface_slot,
            h,
        })
    }

    /// Outward unit normal `n_{K,σ}`.
    pub fn normal(&self, cell: usize, face: usize) -> Point {
        if self.face_owner[face] == cell {
            self.face_normal[face]
        } else {
            -self.face_normal[face]
        }
    }

    /// `d_{K,σ}`, the distance from `x_K` to the line of face σ.
    pub fn distance(&self, mesh: &MeshTriplet, cell: usize, face: usize) -> f64 {
        let i = mesh.faces[face].cells.iter().position(|&c| c == cell).expect("cell not on face");
        self.face_distance[face][i]
    }

    pub fn domain_area(&self) -> f64 {
        self.cell_area.iter().sum()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_area.len()
    }

    /// Subface touched by half-subface `hf`.
    pub fn half_subface(&self, hf: usize) -> usize {
        self.subcells[hf / 2].subfaces[hf % 2]
    }

    /// Cell owning half-subface `hf`.
    pub fn half_cell(&self, hf: usize) -> usize {
        self.subcells[hf / 2].cell
    }
}

/// The face's vertices in the loop order of `cell`.
fn oriented_in(mesh: &MeshTriplet, cell: usize, face: usize) -> (usize, usize) {
    let j = mesh.cell_faces[cell].iter().position(|&f| f == face).unwrap();
    let lp = &mesh.cells[cell];
    (lp[j], lp[(j + 1) % lp.len()])
}

/// Per-subface quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureRule {
    /// Two-point Gauss–Legendre rule.
    Gauss2,
    /// One point at fraction `eta` of the subface length from the face midpoint towards the vertex.
    Point { eta: f64 },
}

#[derive(Clone, Debug)]
pub struct Quadrature {
    pub rule: QuadratureRule,
    per_subface: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(geometry: &Geometry, rule: QuadratureRule) -> Self {
        let per_subface = match rule {
            QuadratureRule::Gauss2 => 2,
            QuadratureRule::Point { .. } => 1,
        };
        let mut points = Vec::with_capacity(per_subface * geometry.subfaces.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for sf in &geometry.subfaces {
            match rule {
                QuadratureRule::Gauss2 => {
                    let g = 0.5 / 3f64.sqrt();
                    for t in [0.5 - g, 0.5 + g] {
                        points.push(sf.start + (sf.end - sf.start) * t);
                        weights.push(0.5 * sf.length);
                    }
                }
                QuadratureRule::Point { eta } => {
                    points.push(sf.end + (sf.start - sf.end) * eta);
                    weights.push(sf.length);
                }
            }
        }
        Self { rule, per_subface, points, weights }
    }

    pub fn per_subface(&self) -> usize {
        self.per_subface
    }

    pub fn points(&self, subface: usize) -> &[Point] {
        let q = self.per_subface;
        &self.points[q * subface..q * (subface + 1)]
    }

    pub fn weights(&self, subface: usize) -> &[f64] {
        let q = self.per_subface;
        &self.weights[q * subface..q * (subface + 1)]
    }

    /// Weighted mean of the quadrature points, `⟨x⟩`.
    pub fn mean_point(&self, subface: usize) -> Point {
        let w = self.weights(subface);
        let total: f64 = w.iter().sum();
        self.points(subface).iter().zip(w).map(|(p, wi)| p * *wi).sum::<Point>() / total
    }

    /// Quadrature average of `g` over a subface.
    pub fn average<T>(&self, subface: usize, g: impl Fn(Point) -> T) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let w = self.weights(subface);
        let total: f64 = w.iter().sum();
        self.points(subface).iter().zip(w).map(|(p, wi)| g(*p) * (*wi / total)).sum()
    }
}
