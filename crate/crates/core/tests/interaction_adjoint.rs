use proptest::prelude::*;
use regctl_core::interaction::{apply, apply_adjoint};
use regctl_core::presets::{experiment1_kernel, experiment1_operator, experiment2_operator};
use regctl_core::{Field, Grid, InteractionOperator};

fn oracle_integral(n: usize, x: (f64, f64), f: impl Fn(f64, f64) -> f64) -> f64 {
    // Independent tensor trapezoid, not using the crate's weights.
    let h = 1.0 / (n - 1) as f64;
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let (xp, yp) = (i as f64 * h, j as f64 * h);
            sum += wx * wy * experiment1_kernel(x, (xp, yp)) * f(xp, yp);
        }
    }
    sum * h * h
}

#[test]
fn local_and_constant_kernel_reductions() {
    let g = Grid::unit_square(6).unwrap();
    let b = InteractionOperator::local(Field::constant(&g, 2.0)).unwrap();
    let three = Field::constant(&g, 3.0);
    assert!(apply(&b, &three).unwrap().values().iter().all(|v| *v == 6.0));
    assert!(apply_adjoint(&b, &three).unwrap().values().iter().all(|v| *v == 6.0));

    let ones = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    let out = apply(&ones, &Field::constant(&g, 1.0)).unwrap();
    assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn separable_kernel_adjoint_factorizes() {
    let g = Grid::unit_square(7).unwrap();
    let f = |x: f64, y: f64| 1.0 + x * y;
    let h = |x: f64, y: f64| 2.0 - x + y * y;
    let b = InteractionOperator::nonlocal_from_fn(&g, |p, q| f(p.0, p.1) * h(q.0, q.1)).unwrap();
    let w = Field::from_fn(&g, |x, y| (x - y).abs() + 0.5);
    let got = apply_adjoint(&b, &w).unwrap();
    let fw = Field::from_fn(&g, f).inner(&w).unwrap();
    let expected = Field::from_fn(&g, |x, y| h(x, y) * fw);
    let err = got.zip_map(&expected, |a, b| a - b).unwrap().norm_inf();
    assert!(err < 1e-13 * expected.norm_inf());
}

#[test]
fn experiment_one_kernel_matches_refined_quadrature() {
    let g = Grid::unit_square(36).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let y = |x: f64, y: f64| 1.0 + 0.5 * (3.0 * x).sin() * y;
    let by = apply(&b, &Field::from_fn(&g, y)).unwrap();
    let fine = 4 * 35 + 1;
    for (i, j) in [(7, 11), (20, 30), (34, 2)] {
        let node = (g.x(i), g.y(j));
        let reference = oracle_integral(fine, node, y);
        let got = by.at(i, j);
        assert!(
            (got - reference).abs() <= 1e-2 * reference.abs(),
            "node ({i},{j}): {got} vs {reference}"
        );
    }
}

#[test]
fn kernel_entries_are_nonnegative_for_presets() {
    let g = Grid::unit_square(9).unwrap();
    for b in [experiment1_operator(&g).unwrap(), experiment2_operator(&g).unwrap()] {
        assert!(b.dense_matrix().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn negative_kernel_rejected() {
    let g = Grid::unit_square(4).unwrap();
    assert!(InteractionOperator::nonlocal_from_fn(&g, |p, _| p.0 - 0.5).is_err());
    assert!(InteractionOperator::local(Field::constant(&g, -1.0)).is_err());
}

fn operator_8x8(seed: u64) -> InteractionOperator {
    let g = Grid::unit_square(8).unwrap();
    let mut state = seed | 1;
    InteractionOperator::nonlocal_from_fn(&g, move |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    })
    .unwrap()
}

fn values(n: usize, lo: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nonlocal_adjoint_identity(seed in any::<u64>(), y in values(64, -1.0), w in values(64, -1.0)) {
        let b = operator_8x8(seed);
        let g = *b.grid();
        let y = Field::from_values(&g, y).unwrap();
        let w = Field::from_values(&g, w).unwrap();
        let lhs = apply(&b, &y).unwrap().inner(&w).unwrap();
        let rhs = y.inner(&apply_adjoint(&b, &w).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * y.norm_l2() * w.norm_l2());
    }

    #[test]
    fn local_adjoint_identity(c in values(64, 0.0), y in values(64, -1.0), w in values(64, -1.0)) {
        let g = Grid::unit_square(8).unwrap();
        let b = InteractionOperator::local(Field::from_values(&g, c).unwrap()).unwrap();
        let y = Field::from_values(&g, y).unwrap();
        let w = Field::from_values(&g, w).unwrap();
        let lhs = apply(&b, &y).unwrap().inner(&w).unwrap();
        let rhs = y.inner(&apply_adjoint(&b, &w).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * y.norm_l2() * w.norm_l2());
    }

    #[test]
    fn positivity_preserved(seed in any::<u64>(), y in values(64, 0.0)) {
        let b = operator_8x8(seed);
        let y = Field::from_values(b.grid(), y).unwrap();
        prop_assert!(apply(&b, &y).unwrap().min() >= 0.0);
        prop_assert!(apply_adjoint(&b, &y).unwrap().min() >= 0.0);
    }

    #[test]
    fn both_applications_are_linear(seed in any::<u64>(), y in values(64, -1.0), z in values(64, -1.0), a in -3.0..3.0f64) {
        let b = operator_8x8(seed);
        let g = *b.grid();
        let y = Field::from_values(&g, y).unwrap();
        let z = Field::from_values(&g, z).unwrap();
        let combo = y.zip_map(&z, |u, v| a * u + v).unwrap();
        for adjoint in [false, true] {
            let op = |f: &Field| if adjoint { apply_adjoint(&b, f).unwrap() } else { apply(&b, f).unwrap() };
            let expected = op(&y).zip_map(&op(&z), |u, v| a * u + v).unwrap();
            let diff = op(&combo).zip_map(&expected, |u, v| u - v).unwrap().norm_inf();
            prop_assert!(diff <= 1e-12 * (expected.norm_inf() + 1.0));
        }
    }
}
