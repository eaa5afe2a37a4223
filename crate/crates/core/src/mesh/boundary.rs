use std::fmt;
use std::sync::Arc;

use super::{Geometry, MeshTriplet, Quadrature, Side};
use crate::{Error, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Boundary condition kinds on one face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceCondition {
    pub mechanics: BcKind,
    pub flow: BcKind,
}

impl FaceCondition {
    pub const DIRICHLET: FaceCondition = FaceCondition { mechanics: BcKind::Dirichlet, flow: BcKind::Dirichlet };
    pub const NEUMANN: FaceCondition = FaceCondition { mechanics: BcKind::Neumann, flow: BcKind::Neumann };
}

pub type ScalarData = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorData = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Boundary conditions by unit-square side with data functions.
///
/// `mechanics_data` is the displacement on Dirichlet faces and the traction
/// `π·n` on Neumann faces; `flow_data` is the pressure on Dirichlet faces and
/// the outward flux `q·n` on Neumann faces.
#[derive(Clone)]
pub struct BoundarySpec {
    /// Used for boundary faces whose side has no override (or that lie on no side).
    pub default: FaceCondition,
    pub sides: [Option<FaceCondition>; 4],
    pub mechanics_data: VectorData,
    pub flow_data: ScalarData,
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundarySpec").field("default", &self.default).field("sides", &self.sides).finish()
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::dirichlet()
    }
}

impl BoundarySpec {
    /// Homogeneous Dirichlet conditions for both displacement and pressure.
    pub fn dirichlet() -> Self {
        Self {
            default: FaceCondition::DIRICHLET,
            sides: [None; 4],
            mechanics_data: Arc::new(|_| Point::zeros()),
            flow_data: Arc::new(|_| 0.0),
        }
    }

    pub fn with_side(mut self, side: Side, cond: FaceCondition) -> Self {
        self.sides[side.index()] = Some(cond);
        self
    }

    pub fn with_mechanics_data(mut self, g: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        self.mechanics_data = Arc::new(g);
        self
    }

    pub fn with_flow_data(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.flow_data = Arc::new(g);
        self
    }

    /// Condition on a boundary face.
    pub fn condition(&self, mesh: &MeshTriplet, face: usize) -> FaceCondition {
        mesh.faces[face].side.and_then(|s| self.sides[s.index()]).unwrap_or(self.default)
    }

    /// Per face: true for boundary faces with Dirichlet displacement.
    pub fn mechanics_dirichlet(&self, mesh: &MeshTriplet) -> Vec<bool> {
        self.mask(mesh, |c| c.mechanics == BcKind::Dirichlet)
    }

    /// Per face: true for boundary faces with Dirichlet pressure.
    pub fn flow_dirichlet(&self, mesh: &MeshTriplet) -> Vec<bool> {
        self.mask(mesh, |c| c.flow == BcKind::Dirichlet)
    }

    fn mask(&self, mesh: &MeshTriplet, pred: impl Fn(FaceCondition) -> bool) -> Vec<bool> {
        (0..mesh.num_faces())
            .map(|f| mesh.faces[f].is_boundary() && pred(self.condition(mesh, f)))
            .collect()
    }

    /// Both Dirichlet parts of the boundary must be non-empty.
    pub fn validate(&self, mesh: &MeshTriplet) -> Result<()> {
        if !self.mechanics_dirichlet(mesh).contains(&true) {
            return Err(Error::Boundary("no Dirichlet displacement face".into()));
        }
        if !self.flow_dirichlet(mesh).contains(&true) {
            return Err(Error::Boundary("no Dirichlet pressure face".into()));
        }
        Ok(())
    }

    /// Quadrature averages of the data, one entry per boundary slot.
    pub fn evaluate(&self, quadrature: &Quadrature, geometry: &Geometry) -> BoundaryData {
        let mut data = BoundaryData::zeros(geometry.boundary_subfaces.len());
        for (slot, &sf) in geometry.boundary_subfaces.iter().enumerate() {
            data.flow[slot] = quadrature.average(sf, |x| (self.flow_data)(x));
            let u = quadrature.average(sf, |x| (self.mechanics_data)(x));
            data.mechanics[2 * slot] = u.x;
            data.mechanics[2 * slot + 1] = u.y;
        }
        data
    }
}

/// Boundary data averaged per boundary subface (slot).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub flow: Vec<f64>,
    /// Interleaved `(x, y)` per slot.
    pub mechanics: Vec<f64>,
}

impl BoundaryData {
    pub fn zeros(slots: usize) -> Self {
        Self { flow: vec![0.0; slots], mechanics: vec![0.0; 2 * slots] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, QuadratureRule};

    #[test]
    fn side_overrides() {
        let m = build_cartesian(2);
        let bc = BoundarySpec::dirichlet().with_side(Side::North, FaceCondition::NEUMANN);
        let mask = bc.flow_dirichlet(&m);
        for (f, face) in m.faces.iter().enumerate() {
            assert_eq!(mask[f], face.is_boundary() && face.side != Some(Side::North));
        }
        assert!(bc.validate(&m).is_ok());
    }

    #[test]
    fn all_neumann_is_rejected() {
        let m = build_cartesian(2);
        let bc = BoundarySpec { default: FaceCondition::NEUMANN, ..BoundarySpec::dirichlet() };
        assert!(bc.validate(&m).is_err());
    }

    #[test]
    fn linear_data_average() {
        let m = build_cartesian(1);
        let g = Geometry::new(&m).unwrap();
        let bc = BoundarySpec::dirichlet().with_flow_data(|p| p.x);
        let d = bc.evaluate(&Quadrature::new(&g, QuadratureRule::Gauss2), &g);
        for (slot, &sf) in g.boundary_subfaces.iter().enumerate() {
            assert!((d.flow[slot] - g.subfaces[sf].center.x).abs() < 1e-15);
        }
    }
}
