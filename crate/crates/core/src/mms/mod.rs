//! Manufactured solution on the unit square, refinement studies over grid
//! types and `(ρ, τ)` sweeps, and least-squares rate fits.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::assembly::{midpoint_sources, Discretization, Material, MaterialField};
use crate::localop::Variant;
use crate::mesh::{BoundarySpec, GridType};
use crate::postproc::{balance, error_metrics, reconstruct, ErrorReport, ExactFields};
use crate::{Point, Result};

/// `u = (x(1−x) sin 2πy, sin 2πx sin 2πy)`, `p = u_x`, with `α = 1`, `k = I`, `λ = μ = 1`.
pub struct Manufactured;

impl Manufactured {
    pub fn material(rho: f64) -> Material {
        Material::isotropic(1.0, 1.0, 1.0, rho, 1.0)
    }

    pub fn u(x: Point) -> Point {
        let (sx, sy) = ((2.0 * PI * x.x).sin(), (2.0 * PI * x.y).sin());
        Point::new(x.x * (1.0 - x.x) * sy, sx * sy)
    }

    pub fn p(x: Point) -> f64 {
        Self::u(x).x
    }

    /// Rows are components: `(∇u)_ij = ∂u_i/∂x_j`.
    pub fn grad_u(x: Point) -> Matrix2<f64> {
        let (s, c) = ((2.0 * PI * x.y).sin(), (2.0 * PI * x.y).cos());
        let (sx, cx) = ((2.0 * PI * x.x).sin(), (2.0 * PI * x.x).cos());
        Matrix2::new(
            (1.0 - 2.0 * x.x) * s,
            2.0 * PI * x.x * (1.0 - x.x) * c,
            2.0 * PI * cx * s,
            2.0 * PI * sx * c,
        )
    }

    pub fn grad_p(x: Point) -> Point {
        let g = Self::grad_u(x);
        Point::new(g[(0, 0)], g[(0, 1)])
    }

    pub fn stress(x: Point) -> Matrix2<f64> {
        let g = Self::grad_u(x);
        g + g.transpose() + Matrix2::identity() * (g.trace() - Self::p(x))
    }

    pub fn flux(x: Point) -> Point {
        -Self::grad_p(x)
    }

    /// `f_u = ∇·π`.
    pub fn f_u(x: Point) -> Point {
        let (s, c) = ((2.0 * PI * x.y).sin(), (2.0 * PI * x.y).cos());
        let (sx, cx) = ((2.0 * PI * x.x).sin(), (2.0 * PI * x.x).cos());
        let pi2 = PI * PI;
        Point::new(
            (4.0 * pi2 * x.x * x.x - 4.0 * pi2 * x.x + 2.0 * x.x - 7.0) * s + 8.0 * pi2 * cx * c,
            (2.0 * PI * x.x * x.x - 10.0 * PI * x.x + 4.0 * PI) * c - 16.0 * pi2 * sx * s,
        )
    }

    pub fn div_u(x: Point) -> f64 {
        Self::grad_u(x).trace()
    }

    pub fn laplace_p(x: Point) -> f64 {
        let s = (2.0 * PI * x.y).sin();
        (4.0 * PI * PI * x.x * x.x - 4.0 * PI * PI * x.x - 2.0) * s
    }

    /// `f_p = ∇·u + ρp + τ∇·q`.
    pub fn f_p(x: Point, rho: f64, tau: f64) -> f64 {
        Self::div_u(x) + rho * Self::p(x) - tau * Self::laplace_p(x)
    }

    pub fn boundary() -> BoundarySpec {
        BoundarySpec::dirichlet().with_mechanics_data(Self::u).with_flow_data(Self::p)
    }

    pub fn exact() -> ExactFields<'static> {
        ExactFields { u: &Self::u, p: &Self::p, stress: &Self::stress, flux: &Self::flux }
    }
}

/// Least-squares slope of `log e` against `log h` over the last three points.
pub fn fit_rate(h: &[f64], e: &[f64]) -> f64 {
    assert_eq!(h.len(), e.len());
    let k = h.len().min(3);
    let (xs, ys): (Vec<f64>, Vec<f64>) = h[h.len() - k..].iter().zip(&e[e.len() - k..]).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let n = k as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One refinement level: discretization reused for every `(ρ, τ)`.
pub struct Level {
    pub level: usize,
    pub n: usize,
    pub disc: Discretization,
    f_u: Vec<f64>,
    div_u: Vec<f64>,
    p: Vec<f64>,
    laplace_p: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub n: usize,
    /// Nominal mesh size `1/n`.
    pub h: f64,
    pub report: ErrorReport,
    /// Largest relative cell residual (mass or momentum).
    pub residual: f64,
}

impl Level {
    pub fn build(grid: GridType, level: usize, base: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let n = base << (level - 1);
        let mesh = grid.build_perturbed(n, amplitude, seed.wrapping_add(level as u64))?;
        let materials = MaterialField::uniform(mesh.num_cells(), Manufactured::material(1.0), 1.0);
        let variant = Variant::auto(&mesh);
        let disc = Discretization::new(mesh, materials, Manufactured::boundary(), variant)?;
        let g = &disc.geometry;
        let f_u = midpoint_sources(g, Manufactured::f_u).iter().flat_map(|v| [v.x, v.y]).collect();
        Ok(Self {
            level,
            n,
            f_u,
            div_u: midpoint_sources(g, Manufactured::div_u),
            p: midpoint_sources(g, Manufactured::p),
            laplace_p: midpoint_sources(g, Manufactured::laplace_p),
            disc,
        })
    }

    pub fn solve(&self, rho: f64, tau: f64) -> Result<LevelResult> {
        let d = &self.disc;
        let f_p: Vec<f64> =
            (0..d.num_cells()).map(|k| self.div_u[k] + rho * self.p[k] - tau * self.laplace_p[k]).collect();
        let rho_cells = vec![rho; d.num_cells()];
        let bc = d.boundary_data();
        let sol = d.solve_with(&rho_cells, tau, &self.f_u, &f_p, &bc)?;
        let faces = reconstruct(d, &sol, &bc);
        let cells = balance(d, &sol, &faces, &bc, &self.f_u, &f_p, &rho_cells, tau);
        let residual = cells.iter().map(|c| c.max_abs()).fold(sol.residual, f64::max);
        let report = error_metrics(d, &sol, &faces, &Manufactured::exact(), rho, tau);
        Ok(LevelResult { level: self.level, n: self.n, h: 1.0 / self.n as f64, report, residual })
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub grid: GridType,
    pub seed: u64,
    pub rho: f64,
    pub tau: f64,
    pub levels: Vec<LevelResult>,
    pub rate_sigma: f64,
    pub rate_up: f64,
}

impl ConvergenceReport {
    fn new(grid: GridType, seed: u64, rho: f64, tau: f64, levels: Vec<LevelResult>) -> Self {
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let rate = |f: fn(&ErrorReport) -> f64| {
            let e: Vec<f64> = levels.iter().map(|l| f(&l.report)).collect();
            if levels.len() < 2 {
                f64::NAN
            } else {
                fit_rate(&h, &e)
            }
        };
        Self {
            grid,
            seed,
            rho,
            tau,
            rate_sigma: rate(|r| r.eps_sigma),
            rate_up: rate(|r| r.eps_up),
            levels,
        }
    }

    fn failed(grid: GridType, seed: u64, rho: f64, tau: f64) -> Self {
        Self { grid, seed, rho, tau, levels: vec![], rate_sigma: f64::NAN, rate_up: f64::NAN }
    }

    pub fn finest(&self) -> Option<&LevelResult> {
        self.levels.last()
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub grids: Vec<GridType>,
    pub levels: usize,
    pub base: usize,
    pub amplitude: f64,
    pub seed: u64,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grids: GridType::ALL.to_vec(),
            levels: 6,
            base: 4,
            amplitude: 0.5,
            seed: 42,
            rho: vec![1.0, 1e-2, 1e-4, 1e-6],
            tau: vec![1.0, 1e-1, 1e-2, 1e-4, 1e-6],
        }
    }
}

pub fn build_levels(grid: GridType, levels: usize, base: usize, amplitude: f64, seed: u64) -> Result<Vec<Level>> {
    (1..=levels).into_par_iter().map(|l| Level::build(grid, l, base, amplitude, seed)).collect()
}

/// Refinement study for one grid type and one `(ρ, τ)`.
pub fn run_convergence(
    grid: GridType,
    levels: usize,
    base: usize,
    amplitude: f64,
    seed: u64,
    rho: f64,
    tau: f64,
) -> Result<ConvergenceReport> {
    let built = build_levels(grid, levels, base, amplitude, seed)?;
    let results = built.iter().map(|l| l.solve(rho, tau)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(grid, seed, rho, tau, results))
}

/// Solves every `(ρ, τ)` on already built levels; failures become empty (NaN) reports.
pub fn sweep_levels(grid: GridType, seed: u64, levels: &[Level], rho: &[f64], tau: &[f64]) -> Vec<ConvergenceReport> {
    let pairs: Vec<(f64, f64)> = rho.iter().flat_map(|&r| tau.iter().map(move |&t| (r, t))).collect();
    pairs
        .par_iter()
        .map(|&(r, t)| match levels.iter().map(|l| l.solve(r, t)).collect::<Result<Vec<_>>>() {
            Ok(res) => ConvergenceReport::new(grid, seed, r, t, res),
            Err(e) => {
                log::error!("grid {grid}, rho {r:e}, tau {t:e}: {e}");
                ConvergenceReport::failed(grid, seed, r, t)
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub config: SweepConfig,
    pub reports: Vec<ConvergenceReport>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<Sweep> {
    let mut reports = Vec::new();
    for &grid in &config.grids {
        log::info!("grid {grid}: building {} levels", config.levels);
        let levels = build_levels(grid, config.levels, config.base, config.amplitude, config.seed)?;
        reports.extend(sweep_levels(grid, config.seed, &levels, &config.rho, &config.tau));
    }
    Ok(Sweep { config: config.clone(), reports })
}

impl Sweep {
    pub fn get(&self, grid: GridType, rho: f64, tau: f64) -> Option<&ConvergenceReport> {
        self.reports.iter().find(|r| r.grid == grid && r.rho == rho && r.tau == tau)
    }

    /// Rows `ρ`, one column per `(τ, grid)`.
    pub fn table(&self, value: impl Fn(&ConvergenceReport) -> f64) -> String {
        let mut s = String::from("rho");
        for &t in &self.config.tau {
            for g in &self.config.grids {
                let _ = write!(s, ",tau={t:e}:{g}");
            }
        }
        s.push('\n');
        for &r in &self.config.rho {
            let _ = write!(s, "{r:e}");
            for &t in &self.config.tau {
                for &g in &self.config.grids {
                    let v = self.get(g, r, t).map_or(f64::NAN, &value);
                    let _ = write!(s, ",{v:.4e}");
                }
            }
            s.push('\n');
        }
        s
    }

    /// Every level of every report.
    pub fn raw(&self) -> String {
        let mut s = format!(
            "# eps_pi and eps_q are square roots of the squared-sum ratios eps_pi_sq and eps_q_sq\ngrid,seed,level,n,h_nominal,residual,{}\n",
            ErrorReport::CSV_HEADER
        );
        for r in &self.reports {
            for l in &r.levels {
                let _ = write!(s, "{},{},{},{},{:e},{:e},", r.grid, r.seed, l.level, l.n, l.h, l.residual);
                let mut row = Vec::new();
                l.report.write_csv_row(&mut row).expect("in-memory write");
                s.push_str(&String::from_utf8_lossy(&row));
            }
        }
        s
    }

    /// Writes `table1.csv` … `table4.csv` (rate and finest-level value of `ε_Σ` and `ε_{u,p}`) and `raw.csv`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let fin = |f: fn(&ErrorReport) -> f64| move |r: &ConvergenceReport| r.finest().map_or(f64::NAN, |l| f(&l.report));
        std::fs::write(dir.join("table1.csv"), self.table(|r| r.rate_sigma))?;
        std::fs::write(dir.join("table2.csv"), self.table(fin(|e| e.eps_sigma)))?;
        std::fs::write(dir.join("table3.csv"), self.table(|r| r.rate_up))?;
        std::fs::write(dir.join("table4.csv"), self.table(fin(|e| e.eps_up)))?;
        std::fs::write(dir.join("raw.csv"), self.raw())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(Point) -> f64>(f: F, x: Point, dir: Point) -> f64 {
        let h = 1e-5;
        (f(x + dir * h) - f(x - dir * h)) / (2.0 * h)
    }

    #[test]
    fn forcing_matches_finite_differences() {
        let e = [Point::x(), Point::y()];
        for x in [Point::new(0.3, 0.7), Point::new(0.81, 0.12), Point::new(0.5, 0.5)] {
            let div_pi = Point::new(
                fd(|y| Manufactured::stress(y)[(0, 0)], x, e[0]) + fd(|y| Manufactured::stress(y)[(0, 1)], x, e[1]),
                fd(|y| Manufactured::stress(y)[(1, 0)], x, e[0]) + fd(|y| Manufactured::stress(y)[(1, 1)], x, e[1]),
            );
            assert!((div_pi - Manufactured::f_u(x)).norm() < 1e-5);
            let div_q = fd(|y| Manufactured::flux(y).x, x, e[0]) + fd(|y| Manufactured::flux(y).y, x, e[1]);
            let div_u = fd(|y| Manufactured::u(y).x, x, e[0]) + fd(|y| Manufactured::u(y).y, x, e[1]);
            assert!((Manufactured::f_p(x, 0.3, 0.7) - (div_u + 0.3 * Manufactured::p(x) + 0.7 * div_q)).abs() < 1e-6);
            for i in 0..2 {
                for j in 0..2 {
                    let d = fd(|y| Manufactured::u(y)[i], x, e[j]);
                    assert!((Manufactured::grad_u(x)[(i, j)] - d).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rate_of_power_law() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powf(1.7)).collect();
        assert!((fit_rate(&h, &e) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_boundary_data() {
        for t in [0.0, 0.3, 1.0] {
            for x in [Point::new(t, 0.0), Point::new(t, 1.0), Point::new(0.0, t), Point::new(1.0, t)] {
                assert!(Manufactured::u(x).norm() < 1e-15);
            }
        }
    }
}
