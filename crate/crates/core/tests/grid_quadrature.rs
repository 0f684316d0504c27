use std::f64::consts::PI;

use proptest::prelude::*;
use regctl_core::grid::{apply_neumann_laplacian, gradient_magnitude, integrate};
use regctl_core::{Bounds, Field, Grid};

fn laplacian_error(n: usize) -> f64 {
    let g = Grid::unit_square(n).unwrap();
    let f = Field::from_fn(&g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
    let lap = apply_neumann_laplacian(&f);
    let exact = f.map(|v| -5.0 * PI * PI * v);
    lap.zip_map(&exact, |a, b| a - b).unwrap().norm_inf()
}

#[test]
fn spacings_follow_node_count() {
    let g = Grid::unit_square(36).unwrap();
    assert!((g.dx() - 1.0 / 35.0).abs() < 1e-16);
    assert!((g.dx() - 2.857e-2).abs() < 1e-5);

    let g = Grid::unit_square(3).unwrap();
    assert_eq!((g.dx(), g.dy()), (0.5, 0.5));

    let g = Grid::new(5, 3, Bounds::new(0.0, 2.0, 0.0, 1.0)).unwrap();
    assert_eq!((g.dx(), g.dy()), (0.5, 0.5));
    assert_eq!(g.x(4), 2.0);
    assert_eq!(g.y(2), 1.0);
}

#[test]
fn degenerate_grids_rejected() {
    assert!(Grid::unit_square(2).is_err());
    assert!(Grid::new(5, 2, Bounds::UNIT_SQUARE).is_err());
    assert!(Grid::new(5, 5, Bounds::new(0.0, 0.0, 0.0, 1.0)).is_err());
    assert!(Grid::new(5, 5, Bounds::new(1.0, 0.0, 0.0, 1.0)).is_err());
}

#[test]
fn laplacian_kills_constants() {
    let g = Grid::new(7, 5, Bounds::new(-1.0, 2.0, 0.0, 0.5)).unwrap();
    let lap = apply_neumann_laplacian(&Field::constant(&g, 3.7));
    assert!(lap.norm_inf() < 1e-12);
}

#[test]
fn laplacian_of_cosine_is_second_order() {
    let e17 = laplacian_error(17);
    let e33 = laplacian_error(33);
    let e65 = laplacian_error(65);
    let p1 = (e17 / e33).log2();
    let p2 = (e33 / e65).log2();
    assert!(p1 >= 1.9 && p2 >= 1.9, "orders {p1} {p2}");
}

#[test]
fn cosine_in_x_has_zero_discrete_flux() {
    let g = Grid::unit_square(33).unwrap();
    let f = Field::from_fn(&g, |x, _| (PI * x).cos());
    let lap = apply_neumann_laplacian(&f);
    let exact = f.map(|v| -PI * PI * v);
    let err = lap.zip_map(&exact, |a, b| a - b).unwrap().norm_inf();
    // O(dx^2) with the mirror closure
    assert!(err < PI.powi(4) / 12.0 / (32.0 * 32.0) * 1.1, "error {err}");
}

#[test]
fn quadrature_is_exact_on_affine_fields() {
    let g = Grid::unit_square(11).unwrap();
    assert!((integrate(&Field::constant(&g, 1.0)) - 1.0).abs() < 1e-15);
    assert!((integrate(&Field::from_fn(&g, |x, _| x)) - 0.5).abs() < 1e-15);
    let r = Grid::new(6, 9, Bounds::new(-1.0, 2.0, 1.0, 3.0)).unwrap();
    // int (2 + x - 3 y) over [-1,2]x[1,3] = 6*2 + 2*(1/2)*(4-1) - 3*3*(9-1)/2
    let exact = 12.0 + 3.0 - 36.0;
    let got = integrate(&Field::from_fn(&r, |x, y| 2.0 + x - 3.0 * y));
    assert!((got - exact).abs() < 1e-12, "{got}");
}

#[test]
fn quadrature_of_sine_converges_to_two_over_pi() {
    let mut last = f64::INFINITY;
    for n in [9, 17, 33] {
        let g = Grid::unit_square(n).unwrap();
        let err = (integrate(&Field::from_fn(&g, |x, _| (PI * x).sin())) - 2.0 / PI).abs();
        let h = g.dx();
        // trapezoid error for sin(pi x): pi^2 h^2 / 12 * (2 / pi)
        assert!(err <= PI * h * h / 6.0 * 1.01, "n={n} err={err}");
        assert!(err < last / 3.5);
        last = err;
    }
}

#[test]
fn gradient_magnitude_of_affine_fields() {
    let g = Grid::unit_square(8).unwrap();
    assert!(gradient_magnitude(&Field::constant(&g, 2.0)).norm_inf() < 1e-14);
    let gx = gradient_magnitude(&Field::from_fn(&g, |x, _| x));
    assert!(gx.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    let gxy = gradient_magnitude(&Field::from_fn(&g, |x, y| x + 2.0 * y));
    assert!(gxy.values().iter().all(|v| (v - 5f64.sqrt()).abs() < 1e-12));
}

fn field_strategy(g: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0e3..1.0e3f64, g.len()).prop_map(move |v| Field::from_values(&g, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_gauss_holds_for_any_field(f in field_strategy(Grid::new(9, 6, Bounds::new(0.0, 2.0, -1.0, 1.0)).unwrap())) {
        let total = integrate(&apply_neumann_laplacian(&f));
        prop_assert!(total.abs() <= 1e-10 * f.norm_inf().max(1.0), "{total}");
    }

    #[test]
    fn laplacian_is_linear(
        f in field_strategy(Grid::unit_square(7).unwrap()),
        h in field_strategy(Grid::unit_square(7).unwrap()),
        a in -10.0..10.0f64,
        b in -10.0..10.0f64,
    ) {
        let combo = f.zip_map(&h, |u, v| a * u + b * v).unwrap();
        let lhs = apply_neumann_laplacian(&combo);
        let rhs = apply_neumann_laplacian(&f)
            .zip_map(&apply_neumann_laplacian(&h), |u, v| a * u + b * v)
            .unwrap();
        let diff = lhs.zip_map(&rhs, |u, v| u - v).unwrap().norm_inf();
        prop_assert!(diff <= 1e-9 * (lhs.norm_inf() + 1.0));
    }

    #[test]
    fn quadrature_is_exact_for_random_affine(c0 in -5.0..5.0f64, cx in -5.0..5.0f64, cy in -5.0..5.0f64) {
        let g = Grid::new(6, 8, Bounds::new(0.0, 1.0, 0.0, 2.0)).unwrap();
        let got = integrate(&Field::from_fn(&g, |x, y| c0 + cx * x + cy * y));
        let exact = 2.0 * c0 + cx * 0.5 * 2.0 + cy * 2.0;
        prop_assert!((got - exact).abs() < 1e-12);
    }
}
