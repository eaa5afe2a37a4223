//! Face fluxes and tractions from a solved state, per-cell conservation
//! residuals, and the relative error metrics used by the convergence harness.

use std::io::Write;

use nalgebra::Matrix2;

use crate::assembly::{Discretization, Solution};
use crate::dfield::{CellField, Space};
use crate::mesh::BoundaryData;
use crate::Point;

/// Per-face flux and traction, oriented by the face normal (outward from the owner cell).
#[derive(Clone, Debug)]
pub struct FaceQuantities {
    pub flux: Vec<f64>,
    pub traction: Vec<Point>,
}

pub fn reconstruct(disc: &Discretization, sol: &Solution, bc: &BoundaryData) -> FaceQuantities {
    let faces = &disc.stencils.faces;
    FaceQuantities {
        flux: faces.iter().map(|st| st.flux_value(&sol.p, bc)).collect(),
        traction: faces.iter().map(|st| st.traction_value(&sol.u, &sol.p, bc)).collect(),
    }
}

/// Conservation residuals of one cell, each relative to the sum of magnitudes of its terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellBalance {
    pub mass: f64,
    pub momentum: Point,
}

impl CellBalance {
    pub fn max_abs(&self) -> f64 {
        self.mass.abs().max(self.momentum.amax())
    }
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        0.0
    }
}

/// Mass and momentum balance per cell from the reconstructed face quantities.
///
/// `f_u` (interleaved) and `f_p` are the cell source integrals used in the solve.
pub fn balance(
    disc: &Discretization,
    sol: &Solution,
    faces: &FaceQuantities,
    bc: &BoundaryData,
    f_u: &[f64],
    f_p: &[f64],
    rho: &[f64],
    tau: f64,
) -> Vec<CellBalance> {
    let n = disc.num_cells();
    let g = &disc.geometry;
    let mut mass = vec![(0.0, 0.0); n];
    let mut mom = vec![(Point::zeros(), Point::zeros()); n];
    for (f, face) in disc.mesh.faces.iter().enumerate() {
        let m = g.face_length[f];
        for &k in &face.cells {
            let s = if k == g.face_owner[f] { m } else { -m };
            let q = tau * s * faces.flux[f];
            mass[k].0 += q;
            mass[k].1 += q.abs();
            let t = faces.traction[f] * s;
            mom[k].0 += t;
            mom[k].1 += t.abs();
        }
    }
    (0..n)
        .map(|k| {
            let d = &disc.stencils.divergence[k];
            let dot = |row: &[(usize, f64)], x: &[f64]| row.iter().map(|&(j, c)| c * x[j]).sum::<f64>();
            let div = dot(&d.u, &sol.u) + dot(&d.p, &sol.p) + dot(&d.bc, &bc.mechanics);
            let storage = rho[k] * g.cell_area[k] * sol.p[k];
            let r = mass[k].0 + storage + div - f_p[k];
            let scale = mass[k].1 + storage.abs() + div.abs() + f_p[k].abs();
            let fu = Point::new(f_u[2 * k], f_u[2 * k + 1]);
            let rm = mom[k].0 - fu;
            let sm = mom[k].1 + fu.abs();
            CellBalance {
                mass: relative(r, scale),
                momentum: Point::new(relative(rm.x, sm.x), relative(rm.y, sm.y)),
            }
        })
        .collect()
}

/// Exact fields of a reference solution.
pub struct ExactFields<'a> {
    pub u: &'a dyn Fn(Point) -> Point,
    pub p: &'a dyn Fn(Point) -> f64,
    /// Total stress `π = ℂ:∇u − αpI`.
    pub stress: &'a dyn Fn(Point) -> Matrix2<f64>,
    /// Darcy flux `q = −k∇p`.
    pub flux: &'a dyn Fn(Point) -> Point,
}

/// Relative errors against an exact solution.
///
/// `eps_pi` and `eps_q` are square roots of the squared-sum ratios, which are
/// kept in `eps_pi_sq` and `eps_q_sq`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub cells: usize,
    pub rho: f64,
    pub tau: f64,
    pub eps_u: f64,
    pub eps_p: f64,
    pub eps_p_quot: f64,
    pub eps_pi: f64,
    pub eps_pi_sq: f64,
    pub eps_q: f64,
    pub eps_q_sq: f64,
    pub eps_sigma: f64,
    pub eps_up: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str =
        "h,cells,rho,tau,eps_u,eps_p,eps_p_quot,eps_pi,eps_pi_sq,eps_q,eps_q_sq,eps_sigma,eps_up";

    fn combine(mut self) -> Self {
        self.eps_sigma =
            self.eps_u + self.eps_pi + (self.tau + self.rho) * self.eps_p + self.tau * self.eps_q + self.eps_p_quot;
        self.eps_up = self.eps_u + self.tau * self.eps_p;
        self
    }

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.h,
            self.cells,
            self.rho,
            self.tau,
            self.eps_u,
            self.eps_p,
            self.eps_p_quot,
            self.eps_pi,
            self.eps_pi_sq,
            self.eps_q,
            self.eps_q_sq,
            self.eps_sigma,
            self.eps_up
        )
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        log::warn!("error metric with vanishing exact field");
        f64::NAN
    }
}

pub fn error_metrics(
    disc: &Discretization,
    sol: &Solution,
    faces: &FaceQuantities,
    exact: &ExactFields,
    rho: f64,
    tau: f64,
) -> ErrorReport {
    let g = &disc.geometry;
    let mask = vec![false; disc.mesh.num_faces()];
    let space = Space::new(&disc.mesh, g, &disc.quadrature, &mask);
    let u_ex = CellField::sample_vector(g, exact.u);
    let p_ex = CellField::sample_scalar(g, exact.p);
    let du = CellField::vector(sol.u.iter().zip(u_ex.values()).map(|(a, b)| a - b).collect());
    let dp = CellField::scalar(sol.p.iter().zip(p_ex.values()).map(|(a, b)| a - b).collect());
    let p_norm = space.norm_t0(&p_ex);
    let (mut pi_num, mut pi_den, mut q_num, mut q_den) = (0.0, 0.0, 0.0, 0.0);
    for f in 0..disc.mesh.num_faces() {
        let (x, n, m2) = (g.face_midpoint[f], g.face_normal[f], g.face_length[f].powi(2));
        let t = (exact.stress)(x) * n;
        let q = (exact.flux)(x).dot(&n);
        pi_num += m2 * (faces.traction[f] - t).norm_squared();
        pi_den += m2 * t.norm_squared();
        q_num += m2 * (faces.flux[f] - q).powi(2);
        q_den += m2 * q * q;
    }
    let eps_pi_sq = ratio(pi_num, pi_den);
    let eps_q_sq = ratio(q_num, q_den);
    ErrorReport {
        h: g.h,
        cells: disc.num_cells(),
        rho,
        tau,
        eps_u: ratio(space.norm_t0(&du), space.norm_t0(&u_ex)),
        eps_p: ratio(space.norm_t0(&dp), p_norm),
        eps_p_quot: ratio(space.quotient_seminorm(&dp), p_norm),
        eps_pi: eps_pi_sq.sqrt(),
        eps_pi_sq,
        eps_q: eps_q_sq.sqrt(),
        eps_q_sq,
        eps_sigma: 0.0,
        eps_up: 0.0,
    }
    .combine()
}
