use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Matrix2x4, Matrix3, Matrix3x4, SMatrix};

use crate::{Error, Point, Result};

/// Constitutive data of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    /// Stiffness in Voigt form, acting on `[ε_xx, ε_yy, 2ε_xy]`.
    pub stiffness: Matrix3<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub permeability: Matrix2<f64>,
    /// Lamé parameters if the material was built isotropic.
    pub lame: Option<(f64, f64)>,
}

/// Maps a row-major gradient `[g_xx, g_xy, g_yx, g_yy]` to Voigt strain.
fn strain_map() -> Matrix3x4<f64> {
    Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0)
}

impl Material {
    /// `ℂ:∇u = 2μ ε(u) + λ (∇·u) I`, isotropic permeability `k I`.
    pub fn isotropic(lambda: f64, mu: f64, alpha: f64, rho: f64, k: f64) -> Self {
        let l2m = lambda + 2.0 * mu;
        Self {
            stiffness: Matrix3::new(l2m, lambda, 0.0, lambda, l2m, 0.0, 0.0, 0.0, mu),
            alpha,
            rho,
            permeability: Matrix2::identity() * k,
            lame: Some((lambda, mu)),
        }
    }

    /// Unit Lamé parameters, permeability and Biot coefficient.
    pub fn unit() -> Self {
        Self::isotropic(1.0, 1.0, 1.0, 1.0, 1.0)
    }

    /// Voigt stress `[σ_xx, σ_yy, σ_xy]` from a row-major gradient.
    pub fn stress_voigt_map(&self) -> Matrix3x4<f64> {
        self.stiffness * strain_map()
    }

    /// Linear map from a row-major gradient to the traction `(ℂ:G) n`.
    pub fn traction_map(&self, n: &Point) -> Matrix2x4<f64> {
        let nm = SMatrix::<f64, 2, 3>::new(n.x, 0.0, n.y, 0.0, n.y, n.x);
        nm * self.stress_voigt_map()
    }

    /// Stress tensor `ℂ:G` for a 2×2 gradient.
    pub fn stress(&self, g: &Matrix2<f64>) -> Matrix2<f64> {
        let s = self.stress_voigt_map() * nalgebra::Vector4::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
        Matrix2::new(s[0], s[2], s[2], s[1])
    }

    /// `n·ℂ n` contracted over the displacement index (trace of the acoustic tensor).
    pub fn normal_stiffness(&self, n: &Point) -> f64 {
        let t = self.traction_map(n);
        // columns for ∂u_i/∂x_j with j along n: g = e_i ⊗ n
        (0..2)
            .map(|i| {
                let mut g = nalgebra::Vector4::zeros();
                g[2 * i] = n.x;
                g[2 * i + 1] = n.y;
                (t * g)[i]
            })
            .sum()
    }

    pub fn normal_permeability(&self, n: &Point) -> f64 {
        n.dot(&(self.permeability * n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.stiffness.symmetric_eigenvalues().min() <= 0.0
            || (self.stiffness - self.stiffness.transpose()).abs().max() > 1e-12 * self.stiffness.abs().max()
        {
            return Err(Error::Material("stiffness is not symmetric positive definite".into()));
        }
        let k = &self.permeability;
        if (k[(0, 1)] - k[(1, 0)]).abs() > 1e-12 * k.abs().max() || k.symmetric_eigenvalues().min() < 0.0 {
            return Err(Error::Material("permeability is not symmetric positive semi-definite".into()));
        }
        if !(self.alpha >= 0.0 && self.rho >= 0.0) {
            return Err(Error::Material("alpha and rho must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-cell materials plus the global time step `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    pub cells: Vec<Material>,
    pub tau: f64,
}

impl MaterialField {
    pub fn uniform(ncells: usize, m: Material, tau: f64) -> Self {
        Self { cells: vec![m; ncells], tau }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Same materials with every `ρ_K` replaced.
    pub fn with_rho(&self, rho: f64) -> Self {
        let mut out = self.clone();
        out.cells.iter_mut().for_each(|m| m.rho = rho);
        out
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..self.clone() }
    }

    pub fn validate(&self, ncells: usize) -> Result<()> {
        if self.cells.len() != ncells {
            return Err(Error::Material(format!("{} materials for {ncells} cells", self.cells.len())));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::Material("tau must be non-negative".into()));
        }
        self.cells.iter().try_for_each(Material::validate)
    }
}

const HEADER: &str = "biotfv-mat v1";

fn parse_line(ln: usize, tokens: &[&str]) -> Result<Material> {
    let v: Vec<f64> = tokens
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(ln, "bad number"))?;
    if v.len() != 7 {
        return Err(Error::parse(ln, "expected 'lambda mu alpha rho kxx kxy kyy'"));
    }
    let mut m = Material::isotropic(v[0], v[1], v[2], v[3], 1.0);
    m.permeability = Matrix2::new(v[4], v[5], v[5], v[6]);
    Ok(m)
}

/// Reads a material file for `ncells` cells; `τ` is supplied separately.
///
/// Either a single `uniform lambda mu alpha rho kxx kxy kyy` line or one
/// `lambda mu alpha rho kxx kxy kyy` line per cell.
pub fn read_materials<R: BufRead>(r: R, ncells: usize, tau: f64) -> Result<MaterialField> {
    let mut cells = Vec::new();
    let mut header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.is_empty() || t[0].starts_with('#') {
            continue;
        }
        if !header {
            if line.trim() != HEADER {
                return Err(Error::parse(ln, format!("expected '{HEADER}'")));
            }
            header = true;
            continue;
        }
        if t[0] == "uniform" {
            if !cells.is_empty() {
                return Err(Error::parse(ln, "'uniform' must be the only material line"));
            }
            let m = parse_line(ln, &t[1..])?;
            cells = vec![m; ncells];
            cells.shrink_to_fit();
            let field = MaterialField { cells, tau };
            field.validate(ncells)?;
            return Ok(field);
        }
        cells.push(parse_line(ln, &t)?);
    }
    if !header {
        return Err(Error::parse(1, format!("expected '{HEADER}'")));
    }
    let field = MaterialField { cells, tau };
    field.validate(ncells)?;
    Ok(field)
}

/// Writes per-cell lines (isotropic materials only).
pub fn write_materials<W: Write>(field: &MaterialField, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for m in &field.cells {
        let (l, mu) = m.lame.ok_or_else(|| Error::Material("only isotropic materials can be written".into()))?;
        let k = &m.permeability;
        writeln!(w, "{l:?} {mu:?} {:?} {:?} {:?} {:?} {:?}", m.alpha, m.rho, k[(0, 0)], k[(0, 1)], k[(1, 1)])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_material_traction() {
        // u = (x, 0): ∇u = e1⊗e1, traction on n = e1 is (λ + 2μ, 0) = (3, 0).
        let m = Material::unit();
        let t = m.traction_map(&Point::new(1.0, 0.0)) * nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(t, nalgebra::Vector2::new(3.0, 0.0));
    }

    #[test]
    fn stress_matches_formula() {
        let m = Material::unit();
        let g = Matrix2::new(0.3, -1.0, 2.0, 0.7);
        let expect = g + g.transpose() + Matrix2::identity() * g.trace();
        assert!((m.stress(&g) - expect).abs().max() < 1e-15);
    }

    #[test]
    fn normal_stiffness_isotropic() {
        let m = Material::isotropic(2.0, 0.5, 1.0, 0.0, 1.0);
        let n = Point::new(0.6, 0.8);
        assert!((m.normal_stiffness(&n) - (2.0 + 3.0 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn read_uniform_and_per_cell() {
        let f = read_materials("biotfv-mat v1\nuniform 1 1 1 0.5 1 0 1\n".as_bytes(), 3, 0.1).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.cells[2].rho, 0.5);
        let mut buf = Vec::new();
        write_materials(&f, &mut buf).unwrap();
        assert_eq!(read_materials(buf.as_slice(), 3, 0.1).unwrap(), f);
        assert!(read_materials("biotfv-mat v1\n1 1 1 1 1 0 1\n".as_bytes(), 2, 0.0).is_err());
        assert!(read_materials("biotfv-mat v1\nuniform 1 1 -1 1 1 0 1\n".as_bytes(), 2, 0.0).is_err());
    }
}
