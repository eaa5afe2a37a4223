use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3x4, SymmetricEigen};
use rayon::prelude::*;

use super::{LocalContext, VertexCondensation};
use crate::mesh::{Geometry, MeshTriplet};
use crate::sparse::{CsrMatrix, LuSolver};
use crate::Result;

/// A condition counts as satisfied when its constant exceeds this value.
pub const THETA_TOL: f64 = 1e-10;

/// Θ^B is only estimated (dense) up to this many cells.
pub const THETA_B_MAX_CELLS: usize = 1024;

/// Relative cut-off separating the range of a semi-definite form from its kernel.
const RANGE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct VertexConditions {
    pub vertex: usize,
    /// Flow coercivity constant.
    pub theta_c: f64,
    /// Mechanics coercivity constant.
    pub theta_a: f64,
    /// Local consistency (pressure stabilization) constant; NaN on boundary vertices.
    pub theta_delta: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Numerical inf-sup estimate for the displacement-divergence coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaB {
    /// Smallest nonzero singular value.
    pub value: f64,
    /// Number of (numerically) zero singular values on mean-free pressures.
    pub kernel_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub vertices: Vec<VertexConditions>,
    pub theta_c: f64,
    pub theta_a: f64,
    pub theta_delta: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Upper bound on the asymmetry constant, `max(θ₁/√2, θ₂)`.
    pub big_theta_lambda: f64,
    pub theta_b: Option<ThetaB>,
}

impl ConditionReport {
    fn from_vertices(vertices: Vec<VertexConditions>) -> Self {
        let min = |f: fn(&VertexConditions) -> f64| {
            vertices.iter().map(f).filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min)
        };
        let max = |f: fn(&VertexConditions) -> f64| vertices.iter().map(f).fold(0.0, f64::max);
        let theta1 = max(|v| v.theta1);
        let theta2 = max(|v| v.theta2);
        Self {
            theta_c: min(|v| v.theta_c),
            theta_a: min(|v| v.theta_a),
            theta_delta: min(|v| v.theta_delta),
            theta1,
            theta2,
            big_theta_lambda: (theta1 / 2f64.sqrt()).max(theta2),
            theta_b: None,
            vertices,
        }
    }

    /// All local constants are positive.
    pub fn local_conditions_hold(&self) -> bool {
        self.theta_c > THETA_TOL && self.theta_a > THETA_TOL && self.theta_delta > THETA_TOL
    }

    /// `8 Θ^Λ < Θ^B`, if Θ^B was computed.
    pub fn asymmetry_bound_holds(&self) -> Option<bool> {
        self.theta_b.map(|tb| 8.0 * self.big_theta_lambda < tb.value)
    }

    pub fn passes(&self) -> bool {
        self.local_conditions_hold() && self.asymmetry_bound_holds().unwrap_or(true)
    }

    /// One row per vertex followed by a summary row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertex,theta_a,theta_c,theta_delta,theta1_lambda,theta2_lambda")?;
        for v in &self.vertices {
            writeln!(w, "{},{:e},{:e},{:e},{:e},{:e}", v.vertex, v.theta_a, v.theta_c, v.theta_delta, v.theta1, v.theta2)?;
        }
        let (tb, verdict) = match (self.theta_b, self.asymmetry_bound_holds()) {
            (Some(tb), Some(ok)) => (format!("{:e}", tb.value), if ok { "pass" } else { "fail" }),
            _ => ("".into(), "n/a"),
        };
        writeln!(
            w,
            "summary,{:e},{:e},{:e},{:e},{:e},big_theta_lambda={:e},theta_b={},asymmetry_bound={},local_conditions={}",
            self.theta_a,
            self.theta_c,
            self.theta_delta,
            self.theta1,
            self.theta2,
            self.big_theta_lambda,
            tb,
            verdict,
            if self.local_conditions_hold() { "pass" } else { "fail" }
        )
    }
}

/// Local maps of one vertex for a scalar (`d = 1`) or vector (`d = 2`) field.
struct Local<'a> {
    ctx: &'a LocalContext<'a>,
    cond: &'a VertexCondensation,
    d: usize,
    /// Gradient map from cell values, `2d·nc × d·nc`.
    grad: &'a DMatrix<f64>,
    dirichlet: &'a [bool],
}

impl<'a> Local<'a> {
    fn nc(&self) -> usize {
        self.cond.cells.len()
    }

    fn ndof(&self) -> usize {
        self.d * self.nc()
    }

    fn grad_rows(&self, i: usize) -> DMatrix<f64> {
        self.grad.rows(2 * self.d * i, 2 * self.d).into_owned()
    }

    fn geometry(&self) -> &Geometry {
        self.ctx.geometry
    }

    fn value_row(&self, i: usize, a: usize, x: crate::Point) -> DVector<f64> {
        let dx = x - self.geometry().cell_center[self.cond.cells[i]];
        let r = 2 * self.d * i + 2 * a;
        let mut row: DVector<f64> = (self.grad.row(r) * dx.x + self.grad.row(r + 1) * dx.y).transpose();
        row[self.d * i + a] += 1.0;
        row
    }

    fn sides(&self, sf: usize) -> Vec<usize> {
        let g = self.geometry();
        g.subface_halves[sf].iter().map(|&hf| self.cond.local_index(g.half_cell(hf)).unwrap()).collect()
    }

    /// `⟨u⟩` on a subface (zero on Dirichlet faces).
    fn avg_row(&self, sf: usize, a: usize) -> DVector<f64> {
        let g = self.geometry();
        if self.dirichlet[g.subfaces[sf].face] {
            return DVector::zeros(self.ndof());
        }
        let q = &self.ctx.quadrature;
        let m: f64 = q.weights(sf).iter().sum();
        let sides = self.sides(sf);
        let mut row = DVector::zeros(self.ndof());
        for &i in &sides {
            for (x, w) in q.points(sf).iter().zip(q.weights(sf)) {
                row += self.value_row(i, a, *x) * (w / m / sides.len() as f64);
            }
        }
        row
    }

    /// `∇̃` of the averaged field on subcell `i`, rows `(a, b)` row-major.
    fn fv_rows(&self, i: usize) -> DMatrix<f64> {
        let g = self.geometry();
        let sc = self.cond.subcells[i];
        let sub = &g.subcells[sc];
        let wts = super::gradient::fv_weights(g, sc);
        let mut out = DMatrix::zeros(2 * self.d, self.ndof());
        for j in 0..2 {
            for a in 0..self.d {
                let mut diff = self.avg_row(sub.subfaces[j], a);
                diff[self.d * i + a] -= 1.0;
                for b in 0..2 {
                    let mut r = out.row_mut(2 * a + b);
                    r += diff.transpose() * wts[j][b];
                }
            }
        }
        out
    }

    /// Jump part of the right-hand forms.
    fn jump_form(&self) -> DMatrix<f64> {
        let g = self.geometry();
        let q = &self.ctx.quadrature;
        let mut out = DMatrix::zeros(self.ndof(), self.ndof());
        for (i, &sc) in self.cond.subcells.iter().enumerate() {
            let sub = &g.subcells[sc];
            for j in 0..2 {
                let sf = sub.subfaces[j];
                let sides = self.sides(sf);
                if sides.len() < 2 {
                    continue;
                }
                let dist = g.distance(self.ctx.mesh, sub.cell, sub.faces[j]);
                let wgt = sub.area / (dist * dist) / g.subfaces[sf].length;
                for (x, w) in q.points(sf).iter().zip(q.weights(sf)) {
                    for a in 0..self.d {
                        let jr = self.value_row(sides[0], a, *x) - self.value_row(sides[1], a, *x);
                        out.ger(wgt * w, &jr, &jr, 1.0);
                    }
                }
                let _ = i;
            }
        }
        out
    }

    /// Local `‖·‖²_{𝒯,s}` on cell values.
    fn t_norm(&self) -> DMatrix<f64> {
        let g = self.geometry();
        let mesh = self.ctx.mesh;
        let mut out = DMatrix::zeros(self.ndof(), self.ndof());
        for &sf in &self.cond.subfaces {
            let f = g.subfaces[sf].face;
            let face = &mesh.faces[f];
            let dists = &g.face_distance[f];
            let idx: Vec<usize> = face.cells.iter().map(|&k| self.cond.local_index(k).unwrap()).collect();
            for a in 0..self.d {
                let mut gamma = DVector::zeros(self.ndof());
                if !self.dirichlet[f] {
                    let den: f64 = dists.iter().map(|d| 1.0 / d).sum();
                    for (&i, &dk) in idx.iter().zip(dists) {
                        gamma[self.d * i + a] += 1.0 / dk / den;
                    }
                }
                for (&i, &dk) in idx.iter().zip(dists) {
                    let mut r = gamma.clone();
                    r[self.d * i + a] -= 1.0;
                    out.ger(g.subfaces[sf].length / dk, &r, &r, 1.0);
                }
            }
        }
        out
    }

    fn area(&self, i: usize) -> f64 {
        self.geometry().subcells[self.cond.subcells[i]].area
    }
}

fn strain_map() -> Matrix3x4<f64> {
    Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0)
}

fn to_dyn(m: &Matrix3x4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 4, |r, c| m[(r, c)])
}

/// Orthonormal range basis scaled by `λ^{-1/2}`, and the kernel basis.
fn range_isqrt(r: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = r.nrows();
    let sym = (r + r.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..n).filter(|&k| lmax > 0.0 && eig.eigenvalues[k] > RANGE_TOL * lmax).collect();
    let kern: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let w = DMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])] / eig.eigenvalues[keep[j]].sqrt());
    let z = DMatrix::from_fn(n, kern.len(), |i, j| eig.eigenvectors[(i, kern[j])]);
    (w, z)
}

/// Smallest generalized eigenvalue of `(sym(l), r)` on the range of `r`.
fn min_generalized(l: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let (w, _) = range_isqrt(r);
    if w.ncols() == 0 {
        return 0.0;
    }
    let ls = (l + l.transpose()) * 0.5;
    let m = w.transpose() * ls * &w;
    SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.min()
}

/// `max pᵀ M v / (|p|_{N_p} |v|_{N_v})`; infinite if `M` does not vanish on the kernels.
///
/// `scale` is the magnitude of the terms summed into `M`; entries below it by
/// roundoff are treated as an exact cancellation.
fn scaled_norm(m: &DMatrix<f64>, scale: f64, np: &DMatrix<f64>, nv: &DMatrix<f64>) -> f64 {
    let tol = 1e-11 * scale;
    if m.norm() <= tol {
        return 0.0;
    }
    let (wp, zp) = range_isqrt(np);
    let (wv, zv) = range_isqrt(nv);
    let leak = (zp.transpose() * m).norm().max((m * &zv).norm());
    if leak > 1e-8 * m.norm() + tol {
        return f64::INFINITY;
    }
    if wp.ncols() == 0 || wv.ncols() == 0 {
        return 0.0;
    }
    (wp.transpose() * m * wv).singular_values().max()
}

fn vertex_conditions(ctx: &LocalContext, cond: &VertexCondensation) -> VertexConditions {
    let g = ctx.geometry;
    let nc = cond.cells.len();
    let mats: Vec<_> = cond.cells.iter().map(|&k| &ctx.materials.cells[k]).collect();
    let h_s = cond.cells.iter().map(|&k| g.cell_diameter[k]).fold(0.0, f64::max);

    let flow = Local { ctx, cond, d: 1, grad: &cond.g_p, dirichlet: &ctx.flow_dirichlet };
    let mech = Local { ctx, cond, d: 2, grad: &cond.g_uu, dirichlet: &ctx.mech_dirichlet };

    // Condition A (flow) and the Condition C right-hand side
    let jump_p = flow.jump_form();
    let (mut lc, mut rc, mut rd) = (DMatrix::zeros(nc, nc), jump_p.clone(), jump_p);
    for i in 0..nc {
        let y = flow.grad_rows(i);
        let k = DMatrix::from_fn(2, 2, |r, c| mats[i].permeability[(r, c)]);
        let m = flow.area(i);
        lc += y.transpose() * &k * flow.fv_rows(i) * m;
        rc += y.transpose() * &k * &y * m;
        rd += y.transpose() * &y * m;
    }
    let theta_c = min_generalized(&lc, &rc);

    // Condition B (mechanics)
    let e = to_dyn(&strain_map());
    let (mut la, mut ra) = (DMatrix::zeros(2 * nc, 2 * nc), mech.jump_form());
    let mut m1 = DMatrix::zeros(nc, 2 * nc);
    let mut m2 = DMatrix::zeros(nc, 2 * nc);
    let mut ld = DMatrix::zeros(nc, nc);
    let (mut scale1, mut scale2) = (0.0, 0.0);
    for i in 0..nc {
        let y = mech.grad_rows(i);
        let f = mech.fv_rows(i);
        let m = mech.area(i);
        let s = to_dyn(&mats[i].stress_voigt_map());
        let d = DMatrix::from_fn(3, 3, |r, c| mats[i].stiffness[(r, c)]);
        la += (&s * &y).transpose() * (&e * &f) * m;
        ra += (&e * &y).transpose() * &d * (&e * &y) * m;
        let yp = cond.g_up.rows(4 * i, 4).into_owned();
        m1 += (&s * &yp).transpose() * (&e * &f) * m;
        scale1 += (&s * &yp).norm() * (&e * &f).norm() * m;
        let tr = |x: &DMatrix<f64>| x.row(0) + x.row(3);
        let a = mats[i].alpha * m;
        scale2 += a * (tr(&y).norm() + tr(&f).norm());
        let mut r2 = m2.row_mut(i);
        r2 += (tr(&y) - tr(&f)) * a;
        let mut r3 = ld.row_mut(i);
        r3 += tr(&yp) * a;
    }
    let theta_a = min_generalized(&la, &ra);
    let theta_delta = if ctx.mesh.is_boundary_vertex(cond.vertex) {
        f64::NAN
    } else {
        min_generalized(&ld, &(rd * (h_s * h_s)))
    };
    let np = Local { ctx, cond, d: 1, grad: &cond.g_p, dirichlet: &ctx.flow_dirichlet }.t_norm();
    let nv = mech.t_norm();
    let mp = DMatrix::from_diagonal(&DVector::from_fn(nc, |i, _| flow.area(i)));
    VertexConditions {
        vertex: cond.vertex,
        theta_c,
        theta_a,
        theta_delta,
        theta1: scaled_norm(&m1, scale1, &np, &nv) / h_s,
        theta2: scaled_norm(&m2, scale2, &mp, &nv),
    }
}

/// Evaluates the local conditions at every vertex (in parallel).
pub fn check_conditions(ctx: &LocalContext, conds: &[VertexCondensation]) -> ConditionReport {
    let vertices = conds.par_iter().map(|c| vertex_conditions(ctx, c)).collect();
    ConditionReport::from_vertices(vertices)
}

/// Global `‖v‖²_𝒯` matrix for interleaved displacements.
fn global_t_norm(mesh: &MeshTriplet, geometry: &Geometry, dirichlet: &[bool]) -> CsrMatrix {
    let mut t = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        let d = &geometry.face_distance[f];
        let den: f64 = d.iter().map(|x| 1.0 / x).sum();
        let m = geometry.face_length[f];
        for a in 0..2 {
            for (&k, &dk) in face.cells.iter().zip(d) {
                // r = γ − e_k
                let mut r: Vec<(usize, f64)> = Vec::new();
                if !dirichlet[f] {
                    for (&l, &dl) in face.cells.iter().zip(d) {
                        r.push((2 * l + a, 1.0 / dl / den));
                    }
                }
                r.push((2 * k + a, -1.0));
                for &(i, x) in &r {
                    for &(j, y) in &r {
                        t.push((i, j, m / dk * x * y));
                    }
                }
            }
        }
    }
    let n = 2 * mesh.num_cells();
    CsrMatrix::from_triplets(n, n, &t)
}

/// Smallest nonzero singular value of `b1` (pressure rows × interleaved
/// displacement columns) between `‖·‖_𝒯` and the mean-free `ℓ²` norm.
///
/// Dense; returns `Ok(None)` above [`THETA_B_MAX_CELLS`] cells.
pub fn estimate_theta_b(
    mesh: &MeshTriplet,
    geometry: &Geometry,
    b1: &CsrMatrix,
    mech_dirichlet: &[bool],
) -> Result<Option<ThetaB>> {
    let n = mesh.num_cells();
    if n > THETA_B_MAX_CELLS {
        return Ok(None);
    }
    let lu = LuSolver::factor(&global_t_norm(mesh, geometry, mech_dirichlet))?;
    let b1t = b1.transpose();
    let mut s = DMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..2 * n).map(|i| b1t.get(i, j)).collect();
        let (z, _) = lu.solve(&col)?;
        let bz = b1.matvec(&z);
        for i in 0..n {
            s[(i, j)] = bz[i];
        }
    }
    let sqm: Vec<f64> = geometry.cell_area.iter().map(|a| a.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| s[(i, j)] / (sqm[i] * sqm[j]));
    // Householder reflector mapping the constant direction to e_0; its other columns span the mean-free space.
    let e = DVector::from_vec(sqm.clone()).normalize();
    let mut w = e.clone();
    w[0] -= 1.0;
    let q = if w.norm() < 1e-14 {
        DMatrix::identity(n, n)
    } else {
        let w = w.normalize();
        DMatrix::identity(n, n) - &w * w.transpose() * 2.0
    };
    let basis = q.columns(1, n - 1).into_owned();
    let reduced = basis.transpose() * ((&a + a.transpose()) * 0.5) * &basis;
    let eig = SymmetricEigen::new(reduced).eigenvalues;
    let lmax = eig.iter().fold(0.0f64, |x, &y| x.max(y));
    let nonzero: Vec<f64> = eig.iter().copied().filter(|&l| l > 1e-10 * lmax).collect();
    let value = nonzero.iter().fold(f64::INFINITY, |x, &y| x.min(y)).sqrt();
    Ok(Some(ThetaB { value, kernel_dim: eig.len() - nonzero.len() }))
}
