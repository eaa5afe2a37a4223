//! Global block system in conservation form, direct solves and backward-Euler
//! time stepping.
//!
//! Unknowns are interleaved per cell as `(u_x, u_y, p)`. Momentum rows read
//! `−Σ_σ m_σ T_K^σ = −∫_K f_u` (from `∇·π = f_u`), mass rows
//! `τ Σ_σ m_σ q_K^σ + ρ_K m_K p_K + α_K Σ_s m_K^s tr(∇̄u)_K^s = ∫_K f_p`.

mod material;

pub use material::{read_materials, write_materials, Material, MaterialField};

use crate::localop::{
    build_stencils, check_conditions, condense_all, estimate_theta_b, ConditionReport, LocalContext, Stencils,
    Variant, VertexCondensation,
};
use crate::mesh::{BoundaryData, BoundarySpec, Geometry, MeshTriplet, Quadrature};
use crate::sparse::{CsrMatrix, LuSolver};
use crate::{Error, Point, Result};

/// Blocks of the discrete operator; independent of `ρ` and `τ`.
#[derive(Clone, Debug)]
pub struct BiotSystem {
    pub num_cells: usize,
    /// Momentum rows over displacements, `2n × 2n`.
    pub a: CsrMatrix,
    /// Momentum rows over pressures, `2n × n`.
    pub b2t: CsrMatrix,
    /// Negated mass-row displacement coupling, `n × 2n`.
    pub b1: CsrMatrix,
    /// Net outward flux per cell over pressures, `n × n`.
    pub c: CsrMatrix,
    /// Negated mass-row pressure coupling through the displacement gradients, `n × n`
    /// (negative semi-definite when the scheme is consistent).
    pub delta: CsrMatrix,
    pub cell_area: Vec<f64>,
    /// Storage coefficients `ρ_K` read from the materials.
    pub rho: Vec<f64>,
    /// Momentum rows over mechanics boundary data.
    pub a_bc: CsrMatrix,
    /// Net flux over flow boundary data.
    pub c_bc: CsrMatrix,
    /// Mass-row displacement coupling over mechanics boundary data.
    pub div_bc: CsrMatrix,
}

impl BiotSystem {
    pub fn assemble(mesh: &MeshTriplet, geometry: &Geometry, materials: &MaterialField, stencils: &Stencils) -> Self {
        let n = mesh.num_cells();
        let nb = geometry.boundary_subfaces.len();
        let (mut a, mut b2t, mut c) = (vec![], vec![], vec![]);
        let (mut a_bc, mut c_bc) = (vec![], vec![]);
        for st in &stencils.faces {
            let m = geometry.face_length[st.face];
            for &k in &mesh.faces[st.face].cells {
                let s = if k == st.cell { m } else { -m };
                for comp in 0..2 {
                    let r = 2 * k + comp;
                    a.extend(st.traction_u[comp].iter().map(|&(j, v)| (r, j, -s * v)));
                    b2t.extend(st.traction_p[comp].iter().map(|&(j, v)| (r, j, -s * v)));
                    a_bc.extend(st.traction_bc[comp].iter().map(|&(j, v)| (r, j, -s * v)));
                }
                c.extend(st.flux.iter().map(|&(j, v)| (k, j, s * v)));
                c_bc.extend(st.flux_bc.iter().map(|&(j, v)| (k, j, s * v)));
            }
        }
        let (mut b1, mut delta, mut div_bc) = (vec![], vec![], vec![]);
        for (k, d) in stencils.divergence.iter().enumerate() {
            b1.extend(d.u.iter().map(|&(j, v)| (k, j, -v)));
            delta.extend(d.p.iter().map(|&(j, v)| (k, j, -v)));
            div_bc.extend(d.bc.iter().map(|&(j, v)| (k, j, v)));
        }
        Self {
            num_cells: n,
            a: CsrMatrix::from_triplets(2 * n, 2 * n, &a),
            b2t: CsrMatrix::from_triplets(2 * n, n, &b2t),
            b1: CsrMatrix::from_triplets(n, 2 * n, &b1),
            c: CsrMatrix::from_triplets(n, n, &c),
            delta: CsrMatrix::from_triplets(n, n, &delta),
            cell_area: geometry.cell_area.clone(),
            rho: materials.cells.iter().map(|m| m.rho).collect(),
            a_bc: CsrMatrix::from_triplets(2 * n, 2 * nb, &a_bc),
            c_bc: CsrMatrix::from_triplets(n, nb, &c_bc),
            div_bc: CsrMatrix::from_triplets(n, 2 * nb, &div_bc),
        }
    }

    /// The interleaved system matrix for storage coefficients `rho` and time step `tau`.
    pub fn matrix_with(&self, rho: &[f64], tau: f64) -> CsrMatrix {
        let n = self.num_cells;
        let mut t = Vec::with_capacity(self.a.nnz() + 2 * self.b2t.nnz() + self.c.nnz() + self.delta.nnz() + n);
        let ui = |j: usize| 3 * (j / 2) + j % 2;
        t.extend(self.a.triplets().map(|(r, j, v)| (ui(r), ui(j), v)));
        t.extend(self.b2t.triplets().map(|(r, j, v)| (ui(r), 3 * j + 2, v)));
        t.extend(self.b1.triplets().map(|(r, j, v)| (3 * r + 2, ui(j), -v)));
        t.extend(self.c.triplets().map(|(r, j, v)| (3 * r + 2, 3 * j + 2, tau * v)));
        t.extend(self.delta.triplets().map(|(r, j, v)| (3 * r + 2, 3 * j + 2, -v)));
        for k in 0..n {
            t.push((3 * k + 2, 3 * k + 2, rho[k] * self.cell_area[k]));
        }
        CsrMatrix::from_triplets(3 * n, 3 * n, &t)
    }

    pub fn matrix(&self, tau: f64) -> CsrMatrix {
        self.matrix_with(&self.rho, tau)
    }

    /// Right-hand side from cell integrals of the sources and the boundary data.
    pub fn rhs(&self, f_u: &[f64], f_p: &[f64], bc: &BoundaryData, tau: f64) -> Vec<f64> {
        let n = self.num_cells;
        assert_eq!(f_u.len(), 2 * n);
        assert_eq!(f_p.len(), n);
        let mom = self.a_bc.matvec(&bc.mechanics);
        let flux = self.c_bc.matvec(&bc.flow);
        let div = self.div_bc.matvec(&bc.mechanics);
        let mut b = vec![0.0; 3 * n];
        for k in 0..n {
            b[3 * k] = -f_u[2 * k] - mom[2 * k];
            b[3 * k + 1] = -f_u[2 * k + 1] - mom[2 * k + 1];
            b[3 * k + 2] = f_p[k] - tau * flux[k] - div[k];
        }
        b
    }
}

/// Splits an interleaved `(u_x, u_y, p)` vector.
pub fn split(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() / 3;
    let u = (0..2 * n).map(|j| x[3 * (j / 2) + j % 2]).collect();
    let p = (0..n).map(|k| x[3 * k + 2]).collect();
    (u, p)
}

/// Joins displacements (interleaved) and pressures into one vector.
pub fn join(u: &[f64], p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut x = vec![0.0; 3 * n];
    for k in 0..n {
        x[3 * k] = u[2 * k];
        x[3 * k + 1] = u[2 * k + 1];
        x[3 * k + 2] = p[k];
    }
    x
}

/// Largest per-row residual `|b − Ax|_i / (Σ_j |a_ij x_j| + |b_i|)`.
pub fn max_row_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &bi) in b.iter().enumerate() {
        let (cols, vals) = a.row(i);
        let (mut ax, mut scale) = (0.0, bi.abs());
        for (&j, &v) in cols.iter().zip(vals) {
            ax += v * x[j];
            scale += (v * x[j]).abs();
        }
        if scale > 0.0 {
            worst = worst.max((bi - ax).abs() / scale);
        }
    }
    worst
}

/// Midpoint-rule source integrals `m_K f(x_K)`.
pub fn midpoint_sources<T>(geometry: &Geometry, f: impl Fn(Point) -> T) -> Vec<T>
where
    T: std::ops::Mul<f64, Output = T>,
{
    geometry.cell_center.iter().zip(&geometry.cell_area).map(|(&x, &m)| f(x) * m).collect()
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Interleaved cell displacements.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Largest relative per-row residual.
    pub residual: f64,
}

/// Mesh, materials, boundary conditions and everything derived from them that
/// does not depend on `ρ`, `τ` or the sources.
pub struct Discretization {
    pub mesh: MeshTriplet,
    pub geometry: Geometry,
    pub materials: MaterialField,
    pub boundary: BoundarySpec,
    pub variant: Variant,
    pub quadrature: Quadrature,
    pub condensation: Vec<VertexCondensation>,
    pub stencils: Stencils,
    pub system: BiotSystem,
}

impl Discretization {
    pub fn new(mesh: MeshTriplet, materials: MaterialField, boundary: BoundarySpec, variant: Variant) -> Result<Self> {
        materials.validate(mesh.num_cells())?;
        boundary.validate(&mesh)?;
        let geometry = Geometry::new(&mesh)?;
        let (condensation, stencils, quadrature) = {
            let ctx = LocalContext::new(&mesh, &geometry, &materials, &boundary, variant);
            let conds = condense_all(&ctx)?;
            let stencils = build_stencils(&ctx, &conds);
            (conds, stencils, ctx.quadrature)
        };
        let system = BiotSystem::assemble(&mesh, &geometry, &materials, &stencils);
        log::debug!(
            "discretized {} cells, {} faces, variant {variant}, worst local condition {:.2e}",
            mesh.num_cells(),
            mesh.num_faces(),
            condensation.iter().map(|c| c.condition).fold(0.0, f64::max)
        );
        Ok(Self { mesh, geometry, materials, boundary, variant, quadrature, condensation, stencils, system })
    }

    pub fn context(&self) -> LocalContext<'_> {
        LocalContext::new(&self.mesh, &self.geometry, &self.materials, &self.boundary, self.variant)
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn boundary_data(&self) -> BoundaryData {
        self.boundary.evaluate(&self.quadrature, &self.geometry)
    }

    /// Local conditions at every vertex and, optionally, the global Θ^B estimate.
    pub fn conditions(&self, with_theta_b: bool) -> Result<ConditionReport> {
        let ctx = self.context();
        let mut report = check_conditions(&ctx, &self.condensation);
        if with_theta_b {
            report.theta_b = estimate_theta_b(&self.mesh, &self.geometry, &self.system.b1, &ctx.mech_dirichlet)?;
        }
        Ok(report)
    }

    /// Static solve with storage `rho` per cell and time step `tau`.
    pub fn solve_with(
        &self,
        rho: &[f64],
        tau: f64,
        f_u: &[f64],
        f_p: &[f64],
        bc: &BoundaryData,
    ) -> Result<Solution> {
        let a = self.system.matrix_with(rho, tau);
        let b = self.system.rhs(f_u, f_p, bc, tau);
        let lu = LuSolver::factor(&a)?;
        let (x, _) = lu.solve(&b)?;
        let residual = max_row_residual(&a, &x, &b);
        let (u, p) = split(&x);
        Ok(Solution { u, p, residual })
    }

    /// Static solve with the materials' `ρ` and `τ` and this discretization's boundary data.
    pub fn solve(&self, f_u: &[f64], f_p: &[f64]) -> Result<Solution> {
        self.solve_with(&self.system.rho, self.materials.tau, f_u, f_p, &self.boundary_data())
    }

    /// Backward-Euler steps `𝔄(ρ,τ) xʲ = 𝔄(ρ,0) xʲ⁻¹ + b_τ − b_0 + sʲ`, where
    /// `b_τ` is the boundary contribution for step `τ` and `sʲ` (interleaved)
    /// comes from `source(j)`. Returns `x⁰, …, x^steps`.
    pub fn march(
        &self,
        x0: &[f64],
        tau: f64,
        steps: usize,
        mut source: impl FnMut(usize) -> Option<Vec<f64>>,
    ) -> Result<Vec<Vec<f64>>> {
        let n = self.num_cells();
        if x0.len() != 3 * n {
            return Err(Error::Solver(format!("initial state has length {}, expected {}", x0.len(), 3 * n)));
        }
        let lhs = self.system.matrix(tau);
        let explicit = self.system.matrix(0.0);
        let bc = self.boundary_data();
        let zeros = (vec![0.0; 2 * n], vec![0.0; n]);
        let b_tau = self.system.rhs(&zeros.0, &zeros.1, &bc, tau);
        let b_0 = self.system.rhs(&zeros.0, &zeros.1, &bc, 0.0);
        let lu = LuSolver::factor(&lhs)?;
        let mut states = vec![x0.to_vec()];
        for j in 1..=steps {
            let prev = states.last().unwrap();
            let mut b = explicit.matvec(prev);
            for i in 0..3 * n {
                b[i] += b_tau[i] - b_0[i];
            }
            if let Some(s) = source(j) {
                b.iter_mut().zip(&s).for_each(|(bi, si)| *bi += si);
            }
            let (x, _) = lu.solve(&b)?;
            log::trace!("step {j}: residual {:.2e}", max_row_residual(&lhs, &x, &b));
            states.push(x);
        }
        Ok(states)
    }

    /// Steady state for the boundary data: zero net flux per cell and momentum balance.
    pub fn steady_state(&self) -> Result<Vec<f64>> {
        let n = self.num_cells();
        let bc = self.boundary_data();
        let rhs_p: Vec<f64> = self.system.c_bc.matvec(&bc.flow).iter().map(|v| -v).collect();
        let (p, _) = LuSolver::factor(&self.system.c)?.solve(&rhs_p)?;
        let mom = self.system.a_bc.matvec(&bc.mechanics);
        let bp = self.system.b2t.matvec(&p);
        let rhs_u: Vec<f64> = (0..2 * n).map(|i| -mom[i] - bp[i]).collect();
        let (u, _) = LuSolver::factor(&self.system.a)?.solve(&rhs_u)?;
        Ok(join(&u, &p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_join_roundtrip() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let (u, p) = split(&x);
        assert_eq!(p, vec![2.0, 5.0, 8.0]);
        assert_eq!(join(&u, &p), x);
    }
}
