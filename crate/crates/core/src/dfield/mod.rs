//! Discrete spaces: cell values (`ℋ_𝒯`), cell plus per-quadrature-point
//! subface values (`ℋ_𝒟`) and cell plus single-valued subface values
//! (`ℋ_𝒞`), with their norms, jumps, averages and interpolators.
//!
//! Vector fields are stored interleaved, component fastest.

mod io;

pub use io::{read_field, write_field};

use crate::mesh::{Geometry, MeshTriplet, Quadrature};
use crate::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    ncomp: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(ncells: usize, ncomp: usize) -> Self {
        Self { ncomp, values: vec![0.0; ncells * ncomp] }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self { ncomp: 1, values }
    }

    /// From interleaved `(x, y)` values.
    pub fn vector(values: Vec<f64>) -> Self {
        assert!(values.len() % 2 == 0);
        Self { ncomp: 2, values }
    }

    /// Samples a scalar function at the cell centers.
    pub fn sample_scalar(geometry: &Geometry, f: impl Fn(Point) -> f64) -> Self {
        Self::scalar(geometry.cell_center.iter().map(|&x| f(x)).collect())
    }

    /// Samples a vector function at the cell centers.
    pub fn sample_vector(geometry: &Geometry, f: impl Fn(Point) -> Point) -> Self {
        Self::vector(geometry.cell_center.iter().flat_map(|&x| {
            let v = f(x);
            [v.x, v.y]
        }).collect())
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn num_cells(&self) -> usize {
        self.values.len() / self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn value(&self, cell: usize, comp: usize) -> f64 {
        self.values[cell * self.ncomp + comp]
    }

    pub fn vector_at(&self, cell: usize) -> Point {
        assert_eq!(self.ncomp, 2);
        Point::new(self.values[2 * cell], self.values[2 * cell + 1])
    }
}

/// Cell values plus values at every quadrature point of every half-subface.
///
/// Point values are indexed by half-subface `2·subcell + j` (see [`Geometry`])
/// and quadrature point.
#[derive(Clone, Debug, PartialEq)]
pub struct SubfaceField {
    pub cells: CellField,
    per_subface: usize,
    values: Vec<f64>,
}

impl SubfaceField {
    pub fn zeros(geometry: &Geometry, quadrature: &Quadrature, ncomp: usize) -> Self {
        let q = quadrature.per_subface();
        Self {
            cells: CellField::zeros(geometry.num_cells(), ncomp),
            per_subface: q,
            values: vec![0.0; 2 * geometry.subcells.len() * q * ncomp],
        }
    }

    fn index(&self, half: usize, beta: usize, comp: usize) -> usize {
        (half * self.per_subface + beta) * self.cells.ncomp + comp
    }

    pub fn point_value(&self, half: usize, beta: usize, comp: usize) -> f64 {
        self.values[self.index(half, beta, comp)]
    }

    pub fn set_point_value(&mut self, half: usize, beta: usize, comp: usize, v: f64) {
        let i = self.index(half, beta, comp);
        self.values[i] = v;
    }

    pub fn point_values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Cell values plus one shared value per subface.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceContinuousField {
    pub cells: CellField,
    values: Vec<f64>,
}

impl FaceContinuousField {
    pub fn zeros(geometry: &Geometry, ncomp: usize) -> Self {
        Self { cells: CellField::zeros(geometry.num_cells(), ncomp), values: vec![0.0; geometry.subfaces.len() * ncomp] }
    }

    pub fn subface_value(&self, subface: usize, comp: usize) -> f64 {
        self.values[subface * self.cells.ncomp + comp]
    }

    pub fn set_subface_value(&mut self, subface: usize, comp: usize, v: f64) {
        let n = self.cells.ncomp;
        self.values[subface * n + comp] = v;
    }
}

/// Mesh, quadrature and Dirichlet faces: everything the norms depend on.
#[derive(Clone, Copy)]
pub struct Space<'a> {
    pub mesh: &'a MeshTriplet,
    pub geometry: &'a Geometry,
    pub quadrature: &'a Quadrature,
    /// Per face: Dirichlet boundary face.
    pub dirichlet: &'a [bool],
}

impl<'a> Space<'a> {
    pub fn new(mesh: &'a MeshTriplet, geometry: &'a Geometry, quadrature: &'a Quadrature, dirichlet: &'a [bool]) -> Self {
        assert_eq!(dirichlet.len(), mesh.num_faces());
        Self { mesh, geometry, quadrature, dirichlet }
    }

    /// Distance-weighted face value `γ_σ u` (0 on Dirichlet faces).
    pub fn gamma(&self, u: &CellField, face: usize, comp: usize) -> f64 {
        if self.dirichlet[face] {
            return 0.0;
        }
        let f = &self.mesh.faces[face];
        let d = &self.geometry.face_distance[face];
        let num: f64 = f.cells.iter().zip(d).map(|(&k, &dk)| u.value(k, comp) / dk).sum();
        let den: f64 = d.iter().map(|dk| 1.0 / dk).sum();
        num / den
    }

    pub fn gamma_face(&self, u: &CellField, face: usize) -> Vec<f64> {
        (0..u.ncomp()).map(|c| self.gamma(u, face, c)).collect()
    }

    /// `[u, v]_𝒯`.
    pub fn inner_t(&self, u: &CellField, v: &CellField) -> f64 {
        (0..self.mesh.num_faces()).map(|f| self.face_term_t(u, v, f, self.geometry.face_length[f])).sum()
    }

    fn face_term_t(&self, u: &CellField, v: &CellField, f: usize, weight: f64) -> f64 {
        let face = &self.mesh.faces[f];
        let mut s = 0.0;
        for c in 0..u.ncomp() {
            let (gu, gv) = (self.gamma(u, f, c), self.gamma(v, f, c));
            for (&k, &d) in face.cells.iter().zip(&self.geometry.face_distance[f]) {
                s += weight / d * (gu - u.value(k, c)) * (gv - v.value(k, c));
            }
        }
        s
    }

    pub fn norm_t(&self, u: &CellField) -> f64 {
        self.inner_t(u, u).sqrt()
    }

    /// Contribution of vertex `s` to `‖u‖²_𝒯` (subface lengths in place of face lengths).
    pub fn norm_t_vertex_sq(&self, u: &CellField, s: usize) -> f64 {
        self.geometry.vertex_subfaces[s]
            .iter()
            .map(|&sf| {
                let sub = &self.geometry.subfaces[sf];
                self.face_term_t(u, u, sub.face, sub.length)
            })
            .sum()
    }

    /// `[u, v]_{𝒯,0}`.
    pub fn inner_t0(&self, u: &CellField, v: &CellField) -> f64 {
        let n = u.ncomp();
        u.values()
            .iter()
            .zip(v.values())
            .enumerate()
            .map(|(i, (a, b))| self.geometry.cell_area[i / n] * a * b)
            .sum()
    }

    pub fn norm_t0(&self, u: &CellField) -> f64 {
        self.inner_t0(u, u).sqrt()
    }

    /// `‖u − ū‖_{𝒯,0}` with `ū` the area-weighted mean (per component).
    pub fn quotient_seminorm(&self, u: &CellField) -> f64 {
        let n = u.ncomp();
        let area = self.geometry.domain_area();
        let mut shifted = u.clone();
        for c in 0..n {
            let mean: f64 =
                (0..u.num_cells()).map(|k| self.geometry.cell_area[k] * u.value(k, c)).sum::<f64>() / area;
            for k in 0..u.num_cells() {
                shifted.values_mut()[k * n + c] -= mean;
            }
        }
        self.norm_t0(&shifted)
    }

    fn is_boundary_subface(&self, sf: usize) -> bool {
        self.geometry.subface_halves[sf].len() == 1
    }

    /// `⟦u⟧ = u_R − u_L` at point β of an interior subface (R the lower cell id); 0 on the boundary.
    pub fn jump(&self, u: &SubfaceField, subface: usize, beta: usize, comp: usize) -> f64 {
        let halves = &self.geometry.subface_halves[subface];
        if halves.len() < 2 {
            return 0.0;
        }
        u.point_value(halves[0], beta, comp) - u.point_value(halves[1], beta, comp)
    }

    /// `⟨u⟩`: quadrature mean over both sides (interior) or the single side (boundary).
    pub fn average(&self, u: &SubfaceField, subface: usize, comp: usize) -> f64 {
        let halves = &self.geometry.subface_halves[subface];
        let w = self.quadrature.weights(subface);
        let m: f64 = w.iter().sum();
        let side = |hf: usize| -> f64 {
            w.iter().enumerate().map(|(b, wb)| wb * u.point_value(hf, b, comp)).sum::<f64>() / m
        };
        halves.iter().map(|&hf| side(hf)).sum::<f64>() / halves.len() as f64
    }

    /// `[u, v]_𝒟`.
    pub fn inner_d(&self, u: &SubfaceField, v: &SubfaceField) -> f64 {
        (0..self.geometry.subcells.len()).map(|sc| self.subcell_term_d(u, v, sc)).sum()
    }

    fn subcell_term_d(&self, u: &SubfaceField, v: &SubfaceField, sc: usize) -> f64 {
        let g = self.geometry;
        let sub = &g.subcells[sc];
        let mut s = 0.0;
        for j in 0..2 {
            let (f, sf) = (sub.faces[j], sub.subfaces[j]);
            let d = g.distance(self.mesh, sub.cell, f);
            let wgt = sub.area / (d * d);
            let w = self.quadrature.weights(sf);
            let m = g.subfaces[sf].length;
            for c in 0..u.cells.ncomp() {
                let du = u.cells.value(sub.cell, c) - self.average(u, sf, c);
                let dv = v.cells.value(sub.cell, c) - self.average(v, sf, c);
                let jumps: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(b, wb)| wb * self.jump(u, sf, b, c) * self.jump(v, sf, b, c))
                    .sum();
                s += wgt * (du * dv + jumps / m);
            }
        }
        s
    }

    pub fn norm_d(&self, u: &SubfaceField) -> f64 {
        self.inner_d(u, u).sqrt()
    }

    /// Contribution of vertex `s` to `‖u‖²_𝒟`.
    pub fn norm_d_vertex_sq(&self, u: &SubfaceField, s: usize) -> f64 {
        self.geometry.vertex_subcells[s].iter().map(|&sc| self.subcell_term_d(u, u, sc)).sum()
    }

    /// `Π_𝒞`: keeps cell values, replaces subface values by their averages.
    pub fn project_c(&self, u: &SubfaceField) -> FaceContinuousField {
        let n = u.cells.ncomp();
        let mut out = FaceContinuousField { cells: u.cells.clone(), values: vec![0.0; self.geometry.subfaces.len() * n] };
        for sf in 0..self.geometry.subfaces.len() {
            for c in 0..n {
                out.values[sf * n + c] = self.average(u, sf, c);
            }
        }
        out
    }

    /// `Π_𝒟`: copies every subface value to all its quadrature points (both sides).
    pub fn embed_d(&self, u: &FaceContinuousField) -> SubfaceField {
        let n = u.cells.ncomp();
        let mut out = SubfaceField::zeros(self.geometry, self.quadrature, n);
        out.cells = u.cells.clone();
        for (sf, halves) in self.geometry.subface_halves.iter().enumerate() {
            for &hf in halves {
                for b in 0..self.quadrature.per_subface() {
                    for c in 0..n {
                        out.set_point_value(hf, b, c, u.subface_value(sf, c));
                    }
                }
            }
        }
        out
    }

    /// `‖u‖_𝒞 = ‖Π_𝒟 u‖_𝒟`.
    pub fn norm_c(&self, u: &FaceContinuousField) -> f64 {
        self.norm_d(&self.embed_d(u))
    }

    /// Sets all point values on Dirichlet faces to zero.
    pub fn pin_dirichlet(&self, u: &mut SubfaceField) {
        let n = u.cells.ncomp();
        for (sf, halves) in self.geometry.subface_halves.iter().enumerate() {
            if !self.dirichlet[self.geometry.subfaces[sf].face] {
                continue;
            }
            for &hf in halves {
                for b in 0..self.quadrature.per_subface() {
                    for c in 0..n {
                        u.set_point_value(hf, b, c, 0.0);
                    }
                }
            }
        }
    }

    pub fn is_boundary(&self, subface: usize) -> bool {
        self.is_boundary_subface(subface)
    }
}

/// `Π_𝒯` of a subface field: the cell values.
pub fn project_t(u: &SubfaceField) -> CellField {
    u.cells.clone()
}
