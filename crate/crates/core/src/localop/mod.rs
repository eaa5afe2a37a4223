//! Per-vertex interaction regions: gradients, static condensation of the
//! local problems, face stencils and the local stability conditions.

mod condense;
mod conditions;
mod gradient;
mod stencil;

use std::fmt;
use std::str::FromStr;

pub use condense::{condense_all, condense_vertex, LocalContext, VertexCondensation, LOCAL_CONDITION_LIMIT};
pub use conditions::{
    check_conditions, estimate_theta_b, ConditionReport, ThetaB, VertexConditions, THETA_B_MAX_CELLS, THETA_TOL,
};
pub use gradient::{fv_gradient, gradient_basis, SubcellGradientBasis, SUBCELL_CONDITION_LIMIT};
pub use stencil::{build_stencils, CellDivergence, FaceStencil, SparseRow, Stencils};

use crate::mesh::{MeshTriplet, QuadratureRule};

/// How value continuity across subfaces is imposed in the local problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Two Gauss points per subface; jumps minimized subject to flux/traction continuity.
    General,
    /// One point a third of the half-face from the face midpoint; symmetric on triangles.
    SimplexSymmetric,
    /// One point at the face midpoint (the classical O-method).
    OMethod,
}

impl Variant {
    pub fn quadrature_rule(self) -> QuadratureRule {
        match self {
            Variant::General => QuadratureRule::Gauss2,
            Variant::SimplexSymmetric => QuadratureRule::Point { eta: 1.0 / 3.0 },
            Variant::OMethod => QuadratureRule::Point { eta: 0.0 },
        }
    }

    /// Continuity imposed pointwise rather than through jump minimization.
    pub fn strong_continuity(self) -> bool {
        self != Variant::General
    }

    /// Symmetric variant on triangulations, general otherwise.
    pub fn auto(mesh: &MeshTriplet) -> Self {
        if mesh.cells.iter().all(|c| c.len() == 3) {
            Variant::SimplexSymmetric
        } else {
            Variant::General
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::General => "general",
            Variant::SimplexSymmetric => "simplex",
            Variant::OMethod => "o-method",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "general" => Ok(Variant::General),
            "simplex" | "simplex-symmetric" => Ok(Variant::SimplexSymmetric),
            "o-method" | "omethod" => Ok(Variant::OMethod),
            _ => Err(format!("unknown variant '{s}' (valid: general, simplex, o-method)")),
        }
    }
}
