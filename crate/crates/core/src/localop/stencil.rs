use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{LocalContext, VertexCondensation};
use crate::mesh::BoundaryData;
use crate::Point;

/// Sparse coefficient list, sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

fn finish(m: BTreeMap<usize, f64>) -> SparseRow {
    m.into_iter().collect()
}

fn dot(row: &SparseRow, x: &[f64]) -> f64 {
    row.iter().map(|&(i, c)| c * x[i]).sum()
}

/// Normal flux and traction of one face, seen from its orientation cell.
///
/// The opposite cell uses the same coefficients with the opposite sign.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceStencil {
    pub face: usize,
    pub cell: usize,
    /// Flux coefficients over cell pressures.
    pub flux: SparseRow,
    /// Flux coefficients over flow boundary slots.
    pub flux_bc: SparseRow,
    /// Traction components over interleaved cell displacements (`2K + i`).
    pub traction_u: [SparseRow; 2],
    /// Traction components over cell pressures.
    pub traction_p: [SparseRow; 2],
    /// Traction components over interleaved mechanics boundary data (`2·slot + i`).
    pub traction_bc: [SparseRow; 2],
}

impl FaceStencil {
    /// `q_K^σ` for cell pressures `p` and boundary data.
    pub fn flux_value(&self, p: &[f64], bc: &BoundaryData) -> f64 {
        dot(&self.flux, p) + dot(&self.flux_bc, &bc.flow)
    }

    /// `T_K^σ` for interleaved displacements `u`, pressures `p` and boundary data.
    pub fn traction_value(&self, u: &[f64], p: &[f64], bc: &BoundaryData) -> Point {
        let t = |a: usize| {
            dot(&self.traction_u[a], u) + dot(&self.traction_p[a], p) + dot(&self.traction_bc[a], &bc.mechanics)
        };
        Point::new(t(0), t(1))
    }
}

/// `α_K Σ_s m_K^s tr(∇̄u)_K^s` as a linear function of the cell unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct CellDivergence {
    pub u: SparseRow,
    pub p: SparseRow,
    pub bc: SparseRow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stencils {
    pub faces: Vec<FaceStencil>,
    pub divergence: Vec<CellDivergence>,
}

fn face_stencil(ctx: &LocalContext, conds: &[VertexCondensation], f: usize) -> FaceStencil {
    let g = ctx.geometry;
    let k0 = g.face_owner[f];
    let mat = &ctx.materials.cells[k0];
    let n = g.face_normal[f];
    let kn = mat.permeability * n;
    let t = mat.traction_map(&n);
    let mut flux = BTreeMap::new();
    let mut flux_bc = BTreeMap::new();
    let mut tu = [BTreeMap::new(), BTreeMap::new()];
    let mut tp = [BTreeMap::new(), BTreeMap::new()];
    let mut tb = [BTreeMap::new(), BTreeMap::new()];
    for &sf in &g.face_subfaces[f] {
        let cond = &conds[g.subfaces[sf].vertex];
        let i = cond.local_index(k0).expect("owner cell touches the vertex");
        let w = g.subfaces[sf].length / g.face_length[f];
        for (c, &k) in cond.cells.iter().enumerate() {
            let q = -w * (kn.x * cond.g_p[(2 * i, c)] + kn.y * cond.g_p[(2 * i + 1, c)]);
            *flux.entry(k).or_insert(0.0) += q;
        }
        for (b, &slot) in cond.boundary_slots.iter().enumerate() {
            let q = -w * (kn.x * cond.g_pb[(2 * i, b)] + kn.y * cond.g_pb[(2 * i + 1, b)]);
            *flux_bc.entry(slot).or_insert(0.0) += q;
        }
        for a in 0..2 {
            let coef = |m: &nalgebra::DMatrix<f64>, col: usize| {
                w * (0..4).map(|r| t[(a, r)] * m[(4 * i + r, col)]).sum::<f64>()
            };
            for (c, &k) in cond.cells.iter().enumerate() {
                for comp in 0..2 {
                    *tu[a].entry(2 * k + comp).or_insert(0.0) += coef(&cond.g_uu, 2 * c + comp);
                }
                *tp[a].entry(k).or_insert(0.0) += coef(&cond.g_up, c);
            }
            for (b, &slot) in cond.boundary_slots.iter().enumerate() {
                for comp in 0..2 {
                    *tb[a].entry(2 * slot + comp).or_insert(0.0) += coef(&cond.g_ub, 2 * b + comp);
                }
            }
        }
    }
    for a in 0..2 {
        *tp[a].entry(k0).or_insert(0.0) -= mat.alpha * n[a];
    }
    FaceStencil {
        face: f,
        cell: k0,
        flux: finish(flux),
        flux_bc: finish(flux_bc),
        traction_u: tu.map(finish),
        traction_p: tp.map(finish),
        traction_bc: tb.map(finish),
    }
}

fn cell_divergence(ctx: &LocalContext, conds: &[VertexCondensation], k: usize) -> CellDivergence {
    let g = ctx.geometry;
    let alpha = ctx.materials.cells[k].alpha;
    let (mut u, mut p, mut bc) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    for &sc in &g.cell_subcells[k] {
        let sub = &g.subcells[sc];
        let cond = &conds[sub.vertex];
        let i = cond.local_index(k).unwrap();
        let w = alpha * sub.area;
        let tr = |m: &nalgebra::DMatrix<f64>, col: usize| w * (m[(4 * i, col)] + m[(4 * i + 3, col)]);
        for (c, &kk) in cond.cells.iter().enumerate() {
            for comp in 0..2 {
                *u.entry(2 * kk + comp).or_insert(0.0) += tr(&cond.g_uu, 2 * c + comp);
            }
            *p.entry(kk).or_insert(0.0) += tr(&cond.g_up, c);
        }
        for (b, &slot) in cond.boundary_slots.iter().enumerate() {
            for comp in 0..2 {
                *bc.entry(2 * slot + comp).or_insert(0.0) += tr(&cond.g_ub, 2 * b + comp);
            }
        }
    }
    CellDivergence { u: finish(u), p: finish(p), bc: finish(bc) }
}

/// One flux/traction stencil per face plus the per-cell divergence rows.
pub fn build_stencils(ctx: &LocalContext, conds: &[VertexCondensation]) -> Stencils {
    let faces = (0..ctx.mesh.num_faces()).into_par_iter().map(|f| face_stencil(ctx, conds, f)).collect();
    let divergence = (0..ctx.mesh.num_cells()).into_par_iter().map(|k| cell_divergence(ctx, conds, k)).collect();
    Stencils { faces, divergence }
}
