use biotfv_core::assembly::{join, split, Discretization, Material, MaterialField, Solution};
use biotfv_core::dfield::{CellField, Space};
use biotfv_core::localop::Variant;
use biotfv_core::mesh::{BcKind, BoundarySpec, FaceCondition, GridType, Side};
use biotfv_core::mms::{Level, Manufactured};
use biotfv_core::postproc::{balance, error_metrics, reconstruct};
use biotfv_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn checkerboard(n: usize) -> Vec<f64> {
    (0..n * n).map(|k| if (k / n + k % n) % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

fn traction_free_north() -> BoundarySpec {
    BoundarySpec::dirichlet()
        .with_side(Side::North, FaceCondition { mechanics: BcKind::Neumann, flow: BcKind::Dirichlet })
}

fn checkerboard_disc(bc: BoundarySpec, variant: Variant) -> Discretization {
    let mesh = GridType::A.build(8).unwrap();
    let mat = MaterialField::uniform(mesh.num_cells(), Material::isotropic(1.0, 1.0, 1.0, 0.0, 1.0), 0.0);
    Discretization::new(mesh, mat, bc, variant).unwrap()
}

/// `B₁ᵀc` vanishes in every cell without Dirichlet displacement faces: each
/// interior face carries `±2` times its face value and `Σ_σ m_σ n_σ = 0`.
/// Cells on the Dirichlet boundary lose the boundary terms, so there it does not.
#[test]
fn checkerboard_pairing_vanishes_away_from_dirichlet_faces() {
    for v in [Variant::General, Variant::OMethod] {
        let d = checkerboard_disc(BoundarySpec::dirichlet(), v);
        let c = checkerboard(8);
        let bt = d.system.b1.transpose().matvec(&c);
        let scale = d.system.b1.max_abs();
        for k in 0..d.num_cells() {
            let dirichlet_cell = d.mesh.cell_faces[k].iter().any(|&f| d.mesh.faces[f].is_boundary());
            let r = bt[2 * k].abs().max(bt[2 * k + 1].abs());
            if dirichlet_cell {
                assert!(r > 1e-3 * scale, "{v} cell {k}");
            } else {
                assert!(r < 1e-12 * scale, "{v} cell {k}: {r}");
            }
        }
    }
}

#[test]
fn checkerboard_is_stabilized_by_delta() {
    for v in [Variant::General, Variant::OMethod] {
        let d = checkerboard_disc(traction_free_north(), v);
        let c = checkerboard(8);
        assert!(d.system.delta.bilinear(&c, &c) < -1e-3, "{v}");
        let n = d.num_cells();
        let f_p: Vec<f64> = d.geometry.cell_center.iter().zip(&d.geometry.cell_area).map(|(x, m)| m * x.x).collect();
        let sol = d.solve(&vec![0.0; 2 * n], &f_p).unwrap();
        assert!(sol.residual < 1e-10, "{v}: {}", sol.residual);
    }
}

#[test]
fn manufactured_level_balances_and_converges() {
    let coarse = Level::build(GridType::A, 2, 4, 0.5, 42).unwrap();
    let fine = Level::build(GridType::A, 3, 4, 0.5, 42).unwrap();
    let rc = coarse.solve(1.0, 1.0).unwrap();
    let rf = fine.solve(1.0, 1.0).unwrap();
    assert!(rc.residual < 1e-10 && rf.residual < 1e-10);
    let ratio = rc.report.eps_up / rf.report.eps_up;
    assert!(ratio > 2.5, "error ratio {ratio}");
}

#[test]
fn error_report_combination_and_quotient_invariance() {
    let lvl = Level::build(GridType::B, 2, 4, 0.5, 1).unwrap();
    let d = &lvl.disc;
    let (rho, tau) = (0.1, 0.01);
    let n = d.num_cells();
    let g = &d.geometry;
    let f_u: Vec<f64> = biotfv_core::assembly::midpoint_sources(g, Manufactured::f_u).iter().flat_map(|v| [v.x, v.y]).collect();
    let f_p = biotfv_core::assembly::midpoint_sources(g, |x| Manufactured::f_p(x, rho, tau));
    let bc = d.boundary_data();
    let sol = d.solve_with(&vec![rho; n], tau, &f_u, &f_p, &bc).unwrap();
    let faces = reconstruct(d, &sol, &bc);
    let r = error_metrics(d, &sol, &faces, &Manufactured::exact(), rho, tau);
    let sigma = r.eps_u + r.eps_pi + (tau + rho) * r.eps_p + tau * r.eps_q + r.eps_p_quot;
    assert!((r.eps_sigma - sigma).abs() < 1e-15);
    assert!((r.eps_up - (r.eps_u + tau * r.eps_p)).abs() < 1e-15);
    assert!((r.eps_pi * r.eps_pi - r.eps_pi_sq).abs() < 1e-15);
    assert!(r.eps_p_quot <= r.eps_p * (1.0 + 1e-12));

    let shifted = Solution { p: sol.p.iter().map(|p| p + 3.0).collect(), ..sol.clone() };
    let r2 = error_metrics(d, &shifted, &faces, &Manufactured::exact(), rho, tau);
    assert!((r2.eps_p_quot - r.eps_p_quot).abs() < 1e-12);
    assert!(r2.eps_p > r.eps_p);

    let cells = balance(d, &sol, &faces, &bc, &f_u, &f_p, &vec![rho; n], tau);
    assert!(cells.iter().all(|c| c.max_abs() < 1e-10));
}

fn march_disc(rho: f64, bc: BoundarySpec) -> Discretization {
    let mesh = GridType::A.build_perturbed(8, 0.5, 3).unwrap();
    let mat = MaterialField::uniform(mesh.num_cells(), Material::isotropic(1.0, 1.0, 1.0, rho, 1.0), 1e-2);
    Discretization::new(mesh, mat, bc, Variant::General).unwrap()
}

#[test]
fn march_contracts_pressure_without_forcing() {
    let d = march_disc(1e-2, BoundarySpec::dirichlet());
    let n = d.num_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x0 = join(&vec![0.0; 2 * n], &(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
    let states = d.march(&x0, 1e-2, 20, |_| None).unwrap();
    let none = vec![false; d.mesh.num_faces()];
    let sp = Space::new(&d.mesh, &d.geometry, &d.quadrature, &none);
    let norms: Vec<f64> = states.iter().map(|x| sp.norm_t0(&CellField::scalar(split(x).1))).collect();
    for w in norms.windows(2).skip(1) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{norms:?}");
    }
    assert!(norms.last().unwrap() < &norms[1]);
}

#[test]
fn march_preserves_steady_state() {
    let bc = BoundarySpec::dirichlet()
        .with_flow_data(|x| 1.0 + x.x - 0.5 * x.y)
        .with_mechanics_data(|x| Point::new(0.1 * x.y, 0.05 * x.x * x.y));
    let d = march_disc(1e-2, bc);
    let steady = d.steady_state().unwrap();
    let states = d.march(&steady, 1e-2, 5, |_| None).unwrap();
    let scale = steady.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for x in &states {
        let diff = x.iter().zip(&steady).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-9 * scale, "{diff}");
    }
}

#[test]
fn one_step_from_rest_equals_static_solve() {
    let d = march_disc(0.5, Manufactured::boundary());
    let n = d.num_cells();
    let tau = 1e-2;
    let g = &d.geometry;
    let f_u: Vec<f64> = biotfv_core::assembly::midpoint_sources(g, Manufactured::f_u).iter().flat_map(|v| [v.x, v.y]).collect();
    let f_p = biotfv_core::assembly::midpoint_sources(g, |x| Manufactured::f_p(x, 0.5, tau));
    let bc = d.boundary_data();
    let stat = d.solve_with(&vec![0.5; n], tau, &f_u, &f_p, &bc).unwrap();
    let s = d.system.rhs(&f_u, &f_p, &bc, 0.0);
    let states = d.march(&vec![0.0; 3 * n], tau, 1, |_| Some(s.clone())).unwrap();
    let x = join(&stat.u, &stat.p);
    let diff = states[1].iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-10, "{diff}");
}
