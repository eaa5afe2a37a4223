use biotfv_core::mms::{fit_rate, Manufactured};
use biotfv_core::Point;
use nalgebra::Matrix2;
use proptest::prelude::*;

const H: f64 = 1e-5;

fn d<T: Fn(Point) -> f64>(f: T, x: Point, e: Point) -> f64 {
    (f(x + H * e) - f(x - H * e)) / (2.0 * H)
}

#[test]
fn reference_values() {
    let u = Manufactured::u(Point::new(0.5, 0.25));
    assert!((u - Point::new(0.25, 0.0)).norm() < 1e-15);
    assert_eq!(Manufactured::p(Point::new(0.5, 0.25)), 0.25);
    for t in [0.0, 0.3, 1.0] {
        for x in [Point::new(t, 0.0), Point::new(t, 1.0), Point::new(0.0, t), Point::new(1.0, t)] {
            assert!(Manufactured::u(x).norm() < 1e-15 && Manufactured::p(x).abs() < 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivatives_match_finite_differences(x in 0.01f64..0.99, y in 0.01f64..0.99, rho in 0.0f64..1.0, tau in 0.0f64..1.0) {
        let p = Point::new(x, y);
        let (ex, ey) = (Point::x(), Point::y());
        let g = Manufactured::grad_u(p);
        let fd = Matrix2::new(
            d(|q| Manufactured::u(q).x, p, ex), d(|q| Manufactured::u(q).x, p, ey),
            d(|q| Manufactured::u(q).y, p, ex), d(|q| Manufactured::u(q).y, p, ey),
        );
        prop_assert!((g - fd).abs().max() < 1e-6);
        let div_stress = Point::new(
            d(|q| Manufactured::stress(q)[(0, 0)], p, ex) + d(|q| Manufactured::stress(q)[(0, 1)], p, ey),
            d(|q| Manufactured::stress(q)[(1, 0)], p, ex) + d(|q| Manufactured::stress(q)[(1, 1)], p, ey),
        );
        prop_assert!((Manufactured::f_u(p) - div_stress).norm() < 1e-5);
        let div_q = d(|q| Manufactured::flux(q).x, p, ex) + d(|q| Manufactured::flux(q).y, p, ey);
        let f_p = Manufactured::div_u(p) + rho * Manufactured::p(p) + tau * div_q;
        prop_assert!((Manufactured::f_p(p, rho, tau) - f_p).abs() < 1e-5);
    }

    #[test]
    fn rate_fit_recovers_power_laws(k in 0.5f64..3.0, c in 0.1f64..10.0) {
        let h: Vec<f64> = (0..5).map(|l| 0.25 / 2f64.powi(l)).collect();
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(k)).collect();
        prop_assert!((fit_rate(&h, &e) - k).abs() < 1e-10);
    }
}
