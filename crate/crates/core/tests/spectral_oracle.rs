use nalgebra::DMatrix;
use regctl_core::elliptic::{Coupling, CouplingOrder, EllipticOperator};
use regctl_core::krylov::LinearOperator;
use regctl_core::presets::{experiment1_operator, left_half};
use regctl_core::spectral::{adjoint_principal_eigenvalue, eigen_gamma_sweep, principal_eigenpair, EigenSetup};
use regctl_core::{Field, Grid, InteractionOperator};

fn setup<'a>(g: &Grid, b: &'a InteractionOperator, gamma: f64) -> EigenSetup<'a> {
    EigenSetup {
        d2: 1e-2,
        a: Field::from_fn(g, |x, y| 1.0 + 0.3 * x * y),
        gamma,
        omega_indicator: left_half(g),
        c0: 1.0,
        k: Field::from_fn(g, |x, _| 0.8 + 0.4 * x),
        b,
        eps: 0.0,
    }
}

/// Smallest real part in the full spectrum of the discrete operator.
fn dense_lowest(s: &EigenSetup<'_>) -> f64 {
    let n = s.a.len();
    let eta = s.a.zip_map(&s.omega_indicator, |a, m| a + s.gamma * m).unwrap();
    let coupling = Coupling {
        k: s.k.map(|v| v + s.eps),
        b: s.b,
        scale: s.c0,
        order: CouplingOrder::Forward,
    };
    let op = EllipticOperator::new(s.d2, &eta, Some(&coupling));
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn power_iteration_matches_dense_spectrum() {
    let g = Grid::unit_square(12).unwrap();
    let nonlocal = experiment1_operator(&g).unwrap();
    let local = InteractionOperator::local(Field::from_fn(&g, |x, y| 1.0 + x - y * y)).unwrap();
    for b in [&nonlocal, &local] {
        for gamma in [0.0, 2.0] {
            let s = setup(&g, b, gamma);
            let pair = principal_eigenpair(&s, 1e-11).unwrap();
            let oracle = dense_lowest(&s);
            assert!(
                (pair.lambda1 - oracle).abs() <= 1e-6,
                "gamma {gamma}: {} vs {oracle}",
                pair.lambda1
            );
            assert!(pair.psi1.min() > 0.0);
            assert!((pair.psi1.norm_l2() - 1.0).abs() < 1e-8);
            assert!(pair.residual < 1e-6, "residual {}", pair.residual);
        }
    }
}

#[test]
fn uniform_full_control_equals_gamma() {
    let g = Grid::unit_square(10).unwrap();
    let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    for gamma in [0.0, 0.5, 1.0] {
        let s = EigenSetup {
            d2: 1e-2,
            a: Field::constant(&g, 1.0),
            gamma,
            omega_indicator: Field::constant(&g, 1.0),
            c0: 1.0,
            k: Field::constant(&g, 1.0),
            b: &b,
            eps: 0.0,
        };
        let lambda = principal_eigenpair(&s, 1e-10).unwrap().lambda1;
        assert!((lambda - gamma).abs() < 1e-6, "{lambda}");
    }
}

#[test]
fn eigenvalue_increases_strictly_with_gamma() {
    let g = Grid::unit_square(12).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let gammas = [0.0, 1.0, 2.0, 4.0];
    let sweep = eigen_gamma_sweep(&setup(&g, &b, 0.0), &gammas, 1e-11).unwrap();
    for w in sweep.windows(2) {
        let step = w[1].0 - w[0].0;
        assert!(w[1].1 - w[0].1 > 1e-10 * step, "{sweep:?}");
    }
    // the sweep values agree with the dense oracle too
    for (gamma, lambda) in &sweep {
        let oracle = dense_lowest(&setup(&g, &b, *gamma));
        assert!((lambda - oracle).abs() < 1e-6);
    }
}

#[test]
fn perturbation_gap_shrinks_monotonically() {
    let g = Grid::unit_square(12).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let base = setup(&g, &b, 1.0);
    let tol = 1e-11;
    let lambda0 = principal_eigenpair(&base, tol).unwrap().lambda1;
    let mut gaps = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for eps in [0.1, 0.01, 0.001] {
        let lambda = principal_eigenpair(&EigenSetup { eps, ..base.clone() }, tol)
            .unwrap()
            .lambda1;
        // non-increasing in eps: smaller eps, larger eigenvalue
        assert!(lambda <= lambda0 + 1e-9);
        assert!(lambda >= previous);
        previous = lambda;
        gaps.push((lambda - lambda0).abs());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 0.02 * gaps[0]);
}

#[test]
fn primal_and_adjoint_eigenvalues_coincide() {
    let g = Grid::unit_square(14).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let tol = 1e-9;
    for gamma in [0.0, 1.5] {
        let s = setup(&g, &b, gamma);
        let primal = principal_eigenpair(&s, tol).unwrap().lambda1;
        let adjoint = adjoint_principal_eigenvalue(&s, tol).unwrap();
        assert!((primal - adjoint).abs() <= 10.0 * tol, "{primal} vs {adjoint}");
    }
}
