use biotfv_core::dfield::{project_t, CellField, FaceContinuousField, Space, SubfaceField};
use biotfv_core::mesh::{read_mesh, write_mesh, Geometry, GridType, MeshTriplet, Quadrature, QuadratureRule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> impl Strategy<Value = GridType> {
    prop_oneof![Just(GridType::A), Just(GridType::B), Just(GridType::C)]
}

fn random_cells(n: usize, ncomp: usize, rng: &mut ChaCha8Rng) -> CellField {
    let v = (0..n * ncomp).map(|_| rng.random_range(-1.0..1.0)).collect();
    if ncomp == 1 {
        CellField::scalar(v)
    } else {
        CellField::vector(v)
    }
}

fn checkerboard(n: usize) -> CellField {
    CellField::scalar((0..n * n).map(|k| if (k / n + k % n) % 2 == 0 { 1.0 } else { -1.0 }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn subcells_and_subfaces_partition(g in grid(), n in 2usize..7, seed in 0u64..1000) {
        let m = g.build_perturbed(n, 0.5, seed).unwrap();
        let geo = Geometry::new(&m).unwrap();
        prop_assert!((geo.cell_area.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..m.num_cells() {
            let s: f64 = geo.cell_subcells[k].iter().map(|&sc| geo.subcells[sc].area).sum();
            prop_assert!((s - geo.cell_area[k]).abs() < 1e-13);
            prop_assert!(geo.subcells.iter().all(|sc| sc.area > 0.0));
        }
        for f in 0..m.num_faces() {
            let [a, b] = geo.face_subfaces[f];
            prop_assert!((geo.subfaces[a].length + geo.subfaces[b].length - geo.face_length[f]).abs() < 1e-14);
            let e = m.vertices[m.faces[f].vertices[1]] - m.vertices[m.faces[f].vertices[0]];
            prop_assert!(geo.face_normal[f].dot(&e).abs() < 1e-13);
            // outward from the owner: the owner's center lies behind the face
            let owner = geo.face_owner[f];
            prop_assert!((geo.face_midpoint[f] - geo.cell_center[owner]).dot(&geo.face_normal[f]) > 0.0);
        }
        // Σ_σ m_σ n_{K,σ} = 0 for every closed cell
        for k in 0..m.num_cells() {
            let s = m.cell_faces[k].iter().fold(biotfv_core::Point::zeros(), |acc, &f| acc + geo.normal(k, f) * geo.face_length[f]);
            prop_assert!(s.norm() < 1e-13);
        }
    }

    #[test]
    fn mesh_file_round_trip(g in grid(), n in 1usize..6, seed in 0u64..1000) {
        let m = g.build_perturbed(n, 0.5, seed).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        prop_assert_eq!(read_mesh(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn perturbation_is_deterministic(g in grid(), seed in 0u64..1000) {
        prop_assert_eq!(g.build_perturbed(5, 0.5, seed).unwrap(), g.build_perturbed(5, 0.5, seed).unwrap());
    }

    #[test]
    fn vertex_decomposition_of_norms(g in grid(), n in 2usize..6, seed in 0u64..1000) {
        let m = g.build_perturbed(n, 0.5, seed).unwrap();
        let geo = Geometry::new(&m).unwrap();
        let q = Quadrature::new(&geo, QuadratureRule::Gauss2);
        let dir: Vec<bool> = m.faces.iter().map(|f| f.is_boundary()).collect();
        let sp = Space::new(&m, &geo, &q, &dir);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_cells(m.num_cells(), 2, &mut rng);
        let per_vertex: f64 = (0..m.num_vertices()).map(|s| sp.norm_t_vertex_sq(&u, s)).sum();
        prop_assert!((per_vertex - sp.norm_t(&u).powi(2)).abs() < 1e-12 * per_vertex.max(1.0));

        let mut w = SubfaceField::zeros(&geo, &q, 1);
        w.cells = random_cells(m.num_cells(), 1, &mut rng);
        w.point_values_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let per_vertex: f64 = (0..m.num_vertices()).map(|s| sp.norm_d_vertex_sq(&w, s)).sum();
        prop_assert!((per_vertex - sp.norm_d(&w).powi(2)).abs() < 1e-12 * per_vertex.max(1.0));
    }

    #[test]
    fn discrete_poincare(g in grid(), n in 2usize..9, seed in 0u64..1000) {
        let m = g.build_perturbed(n, 0.5, seed).unwrap();
        let geo = Geometry::new(&m).unwrap();
        let q = Quadrature::new(&geo, QuadratureRule::Gauss2);
        let dir: Vec<bool> = m.faces.iter().map(|f| f.is_boundary()).collect();
        let sp = Space::new(&m, &geo, &q, &dir);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let u = random_cells(m.num_cells(), 1, &mut rng);
            // domain diameter √2
            prop_assert!(sp.norm_t0(&u) <= 2f64.sqrt() * sp.norm_t(&u));
        }
    }

    #[test]
    fn cell_projection_bounded_by_c_norm(g in grid(), n in 2usize..6, seed in 0u64..1000) {
        let m = g.build_perturbed(n, 0.5, seed).unwrap();
        let geo = Geometry::new(&m).unwrap();
        let q = Quadrature::new(&geo, QuadratureRule::Gauss2);
        let none = vec![false; m.num_faces()];
        let sp = Space::new(&m, &geo, &q, &none);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = FaceContinuousField::zeros(&geo, 1);
        u.cells = random_cells(m.num_cells(), 1, &mut rng);
        for sf in 0..geo.subfaces.len() {
            u.set_subface_value(sf, 0, rng.random_range(-1.0..1.0));
        }
        let t = project_t(&sp.embed_d(&u));
        prop_assert!(sp.norm_t(&t) <= 2f64.sqrt() * sp.norm_c(&u) * (1.0 + 1e-12));
    }
}

fn cartesian_space(n: usize) -> (MeshTriplet, Geometry, Quadrature) {
    let m = GridType::A.build(n).unwrap();
    let g = Geometry::new(&m).unwrap();
    let q = Quadrature::new(&g, QuadratureRule::Gauss2);
    (m, g, q)
}

/// The checkerboard violates `‖u‖_{𝒯,0} ≥ √d h ‖u‖_𝒯`: by hand, `‖c‖²_{𝒯,0} = 1`,
/// `‖c‖²_𝒯 = 8n(n−1)` (each interior face contributes `2·(m/d)·1 = 4`, boundary faces
/// without Dirichlet data nothing), `h = √2/n`, so the right side squared is `32(n−1)/n`.
#[test]
fn inverse_inequality_checkerboard_counterexample() {
    for n in [2usize, 4, 8] {
        let (m, g, q) = cartesian_space(n);
        let none = vec![false; m.num_faces()];
        let sp = Space::new(&m, &g, &q, &none);
        let c = checkerboard(n);
        let l2 = sp.norm_t0(&c);
        let t = sp.norm_t(&c);
        assert!((l2 - 1.0).abs() < 1e-14);
        assert!((t * t - 8.0 * (n * (n - 1)) as f64).abs() < 1e-10 * t * t);
        let rhs = 2f64.sqrt() * g.h * t;
        assert!((rhs * rhs - 32.0 * (n - 1) as f64 / n as f64).abs() < 1e-10);
        assert!(l2 < rhs, "n={n}: the printed direction would need {l2} ≥ {rhs}");
    }
}

/// The usual direction `h ‖u‖_𝒯 ≤ C ‖u‖_{𝒯,0}` holds with a mesh-independent constant.
#[test]
fn inverse_inequality_usual_direction() {
    for grid in GridType::ALL {
        for n in [4usize, 8, 16] {
            let m = grid.build_perturbed(n, 0.5, 7).unwrap();
            let g = Geometry::new(&m).unwrap();
            let q = Quadrature::new(&g, QuadratureRule::Gauss2);
            let dir: Vec<bool> = m.faces.iter().map(|f| f.is_boundary()).collect();
            let sp = Space::new(&m, &g, &q, &dir);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for _ in 0..20 {
                let u = random_cells(m.num_cells(), 1, &mut rng);
                let ratio = g.h * sp.norm_t(&u) / sp.norm_t0(&u);
                assert!(ratio < 20.0, "{grid} n={n}: ratio {ratio}");
            }
        }
    }
}
