use nalgebra::{Matrix2, Vector2};

use crate::dfield::FaceContinuousField;
use crate::mesh::{Geometry, Quadrature};
use crate::{Error, Point, Result};

/// Largest condition number accepted for the 2×2 g-vector system.
pub const SUBCELL_CONDITION_LIMIT: f64 = 1e8;

/// g-vectors of one subcell, one per adjacent subface (in `Subcell::subfaces` order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubcellGradientBasis {
    pub g: [Point; 2],
}

impl SubcellGradientBasis {
    /// Consistent gradient from the two subface means `⟨u⟩` and the cell value.
    pub fn gradient(&self, u_cell: f64, means: [f64; 2]) -> Point {
        self.g[0] * (means[0] - u_cell) + self.g[1] * (means[1] - u_cell)
    }
}

/// Solves `Σ_σ (⟨x⟩_σ − x_K) ⊗ g_σ = I` for subcell `sc`.
pub fn gradient_basis(geometry: &Geometry, quadrature: &Quadrature, sc: usize) -> Result<SubcellGradientBasis> {
    let sub = &geometry.subcells[sc];
    let xk = geometry.cell_center[sub.cell];
    let d0 = quadrature.mean_point(sub.subfaces[0]) - xk;
    let d1 = quadrature.mean_point(sub.subfaces[1]) - xk;
    // rows of X are the offsets, so X⁻¹ has the g-vectors as columns
    let x = Matrix2::new(d0.x, d0.y, d1.x, d1.y);
    let sv = x.singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > SUBCELL_CONDITION_LIMIT {
        return Err(Error::DegenerateSubcell { cell: sub.cell, vertex: sub.vertex, condition });
    }
    let inv = x.try_inverse().expect("checked condition");
    Ok(SubcellGradientBasis { g: [inv.column(0).into(), inv.column(1).into()] })
}

/// Finite volume gradient `(1/m_K^s) Σ_σ m_σ^s (⟨u⟩ − u_K) ⊗ n_{K,σ}` of one subcell.
///
/// Rows are field components; a scalar field gives a 1-row result stored in row 0.
pub fn fv_gradient(geometry: &Geometry, sc: usize, u: &FaceContinuousField) -> Matrix2<f64> {
    let sub = &geometry.subcells[sc];
    let mut out = Matrix2::zeros();
    for j in 0..2 {
        let sf = sub.subfaces[j];
        let n = geometry.normal(sub.cell, sub.faces[j]);
        let w = geometry.subfaces[sf].length / sub.area;
        for c in 0..u.cells.ncomp() {
            let diff = u.subface_value(sf, c) - u.cells.value(sub.cell, c);
            out[(c, 0)] += w * diff * n.x;
            out[(c, 1)] += w * diff * n.y;
        }
    }
    out
}

/// Offsets `Σ_σ m_σ^s n_{K,σ} / m_K^s` weights, used to build ∇̃ as a linear map.
pub(crate) fn fv_weights(geometry: &Geometry, sc: usize) -> [Vector2<f64>; 2] {
    let sub = &geometry.subcells[sc];
    [0, 1].map(|j| geometry.normal(sub.cell, sub.faces[j]) * (geometry.subfaces[sub.subfaces[j]].length / sub.area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, build_triangular, perturb, QuadratureRule};

    #[test]
    fn unit_square_corner_subcell() {
        let m = build_cartesian(1);
        let g = Geometry::new(&m).unwrap();
        let q = Quadrature::new(&g, QuadratureRule::Gauss2);
        let sc = g.cell_subcells[0][0];
        assert_eq!(g.subcells[sc].vertex, 0);
        let b = gradient_basis(&g, &q, sc).unwrap();
        // u(x) = x reproduces the identity
        let means = [0, 1].map(|j| q.mean_point(g.subcells[sc].subfaces[j]));
        let xk = g.cell_center[0];
        let gx = b.gradient(xk.x, [means[0].x, means[1].x]);
        let gy = b.gradient(xk.y, [means[0].y, means[1].y]);
        assert!((gx - Point::new(1.0, 0.0)).norm() < 1e-14);
        assert!((gy - Point::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn exact_on_linear_fields_perturbed() {
        let m = perturb(&build_triangular(5), 0.5, 4).unwrap();
        let g = Geometry::new(&m).unwrap();
        for rule in [QuadratureRule::Gauss2, QuadratureRule::Point { eta: 1.0 / 3.0 }] {
            let q = Quadrature::new(&g, rule);
            let u = |p: Point| Point::new(3.0 * p.x - 2.0 * p.y, p.x);
            for sc in 0..g.subcells.len() {
                let b = gradient_basis(&g, &q, sc).unwrap();
                let sub = &g.subcells[sc];
                let uk = u(g.cell_center[sub.cell]);
                let um = [0, 1].map(|j| u(q.mean_point(sub.subfaces[j])));
                let r0 = b.gradient(uk.x, [um[0].x, um[1].x]);
                let r1 = b.gradient(uk.y, [um[0].y, um[1].y]);
                assert!((r0 - Point::new(3.0, -2.0)).norm() < 1e-12);
                assert!((r1 - Point::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fv_gradient_axis_face() {
        let m = build_cartesian(1);
        let g = Geometry::new(&m).unwrap();
        let sc = g.cell_subcells[0][0];
        let sub = g.subcells[sc].clone();
        let mut u = FaceContinuousField::zeros(&g, 1);
        // face value = cell value + 1 on one face only
        u.set_subface_value(sub.subfaces[0], 0, 1.0);
        u.set_subface_value(sub.subfaces[1], 0, 0.0);
        let grad = fv_gradient(&g, sc, &u);
        let n = g.normal(0, sub.faces[0]);
        assert!((grad[(0, 0)] - 2.0 * n.x).abs() < 1e-15 && (grad[(0, 1)] - 2.0 * n.y).abs() < 1e-15);
    }
}
