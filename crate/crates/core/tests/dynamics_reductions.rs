use std::f64::consts::PI;

use regctl_core::dynamics::{
    solve_adjoint, solve_full_system, solve_linearized, solve_state, PredatorParams, SystemParams, TimeScheme,
};
use regctl_core::elliptic::solve_logistic_steady;
use regctl_core::presets::{experiment1_operator, initial_phi_field, left_half};
use regctl_core::shape::LevelSet;
use regctl_core::spectral::{principal_eigenpair, EigenSetup};
use regctl_core::{Field, Grid, InteractionOperator};

fn uniform<'a>(g: &Grid, b: &'a InteractionOperator, gamma: f64) -> PredatorParams<'a> {
    PredatorParams {
        d: 1e-2,
        a: Field::constant(g, 1.0),
        c0: 1.0,
        gamma,
        b,
        control: Field::constant(g, 1.0),
    }
}

fn max_rel_dev(f: &Field, exact: f64) -> f64 {
    f.values()
        .iter()
        .map(|v| (v - exact).abs() / exact.abs())
        .fold(0.0, f64::max)
}

#[test]
fn state_decays_like_exp_minus_t() {
    let g = Grid::unit_square(12).unwrap();
    let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    let ts = TimeScheme::new(1.0, 36).unwrap().with_krylov_tol(1e-12);
    let one = Field::constant(&g, 1.0);
    let y = solve_state(&uniform(&g, &b, 1.0), &one, &one, &ts).unwrap();
    for n in 0..=36 {
        let t = y.time(n);
        assert!(max_rel_dev(y.at(n), (-t).exp()) <= 2.0 * ts.dt);
    }
    let y = solve_state(&uniform(&g, &b, 0.0), &one, &one, &ts).unwrap();
    assert!(y.fields.iter().all(|f| max_rel_dev(f, 1.0) < 1e-10));
}

#[test]
fn full_system_without_prey_decays_like_exp_minus_two_t() {
    let g = Grid::unit_square(10).unwrap();
    let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    let ts = TimeScheme::new(1.0, 36).unwrap().with_krylov_tol(1e-12);
    let s = SystemParams {
        d1: 1e-2,
        r: Field::constant(&g, 1.0),
        rho: Field::constant(&g, 1.0),
        predator: uniform(&g, &b, 1.0),
    };
    let (h, p) = solve_full_system(&s, &Field::zeros(&g), &Field::constant(&g, 1.0), &ts).unwrap();
    assert!(h.fields.iter().all(|f| f.norm_inf() == 0.0));
    for n in 0..=36 {
        assert!(max_rel_dev(p.at(n), (-2.0 * p.time(n)).exp()) <= 3.0 * ts.dt);
    }
}

#[test]
fn prey_equilibrium_is_preserved() {
    let g = Grid::unit_square(9).unwrap();
    let b = InteractionOperator::identity(&g);
    let ts = TimeScheme::new(1.0, 20).unwrap().with_krylov_tol(1e-12);
    let s = SystemParams {
        d1: 0.1,
        r: Field::constant(&g, 2.0),
        rho: Field::constant(&g, 4.0),
        predator: uniform(&g, &b, 1.0),
    };
    let (h, p) = solve_full_system(&s, &Field::constant(&g, 0.5), &Field::zeros(&g), &ts).unwrap();
    assert!(h.fields.iter().all(|f| max_rel_dev(f, 0.5) < 1e-10));
    assert!(p.fields.iter().all(|f| f.norm_inf() == 0.0));
}

#[test]
fn adjoint_matches_backward_exponential() {
    let g = Grid::unit_square(10).unwrap();
    let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    let ts = TimeScheme::new(1.0, 36).unwrap().with_krylov_tol(1e-12);
    let one = Field::constant(&g, 1.0);
    let r = solve_adjoint(&uniform(&g, &b, 1.0), &one, &ts).unwrap();
    // r(t) = e^{t - T} - 1; compare away from t = T where r vanishes
    for n in 0..30 {
        let exact = (r.time(n) - 1.0).exp() - 1.0;
        assert!(max_rel_dev(r.at(n), exact) <= 3.0 * ts.dt, "n={n}");
    }
    let r = solve_adjoint(&uniform(&g, &b, 0.0), &one, &ts).unwrap();
    for n in 0..30 {
        let exact = r.time(n) - 1.0;
        assert!(max_rel_dev(r.at(n), exact) <= 3.0 * ts.dt, "n={n}");
    }
}

fn experiment_one_final(g: &Grid, b: &InteractionOperator, steps: usize) -> Field {
    let ls = LevelSet::new(initial_phi_field(g), 1e-2).unwrap();
    let mut p = uniform(g, b, 1.0);
    p.control = ls.heaviside();
    let ts = TimeScheme::new(1.0, steps).unwrap().with_krylov_tol(1e-12);
    let one = Field::constant(g, 1.0);
    solve_state(&p, &one, &one, &ts).unwrap().last().clone()
}

#[test]
fn experiment_one_state_converges_in_dt() {
    let g = Grid::unit_square(12).unwrap();
    let b = experiment1_operator(&g).unwrap();
    // growth rate ~18, so first-order behaviour needs 18 dt << 1
    let finals: Vec<Field> = [4608, 9216, 18432]
        .iter()
        .map(|&n| experiment_one_final(&g, &b, n))
        .collect();
    let d1 = finals[0].zip_map(&finals[1], |a, b| a - b).unwrap().norm_inf();
    let d2 = finals[1].zip_map(&finals[2], |a, b| a - b).unwrap().norm_inf();
    let order = (d1 / d2).log2();
    assert!(order >= 0.9, "order {order}");
}

#[test]
fn linearized_state_matches_difference_quotients() {
    let g = Grid::unit_square(10).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let sigma = 0.05;
    let phi = Field::from_fn(&g, |x, y| 0.3 * (PI * x).cos() * (PI * y).cos() - 0.05);
    let psi = Field::from_fn(&g, |x, y| (PI * x).cos() + 0.5 * (2.0 * PI * y).cos());
    let ts = TimeScheme::new(1.0, 20).unwrap().with_krylov_tol(1e-13);
    let one = Field::constant(&g, 1.0);
    let state = |f: &Field| {
        let ls = LevelSet::new(f.clone(), sigma).unwrap();
        let mut p = uniform(&g, &b, 1.0);
        p.control = ls.heaviside();
        solve_state(&p, &one, &one, &ts).unwrap()
    };
    let y = state(&phi);
    let mut p = uniform(&g, &b, 1.0);
    p.control = LevelSet::new(phi.clone(), sigma).unwrap().heaviside();
    let z = solve_linearized(&p, &y, &phi, &psi, sigma, &one, &ts).unwrap();
    assert_eq!(z.first().norm_inf(), 0.0);
    let scale = z.last().norm_inf();
    assert!(scale > 0.0);

    let mut errors = Vec::new();
    for s in [1e-2, 1e-3, 1e-4] {
        let mut moved = phi.clone();
        moved.axpy(s, &psi).unwrap();
        let ys = state(&moved);
        let err = (0..y.len())
            .map(|n| {
                ys.at(n)
                    .zip_map(y.at(n), |a, b| (a - b) / s)
                    .unwrap()
                    .zip_map(z.at(n), |a, b| a - b)
                    .unwrap()
                    .norm_inf()
            })
            .fold(0.0, f64::max);
        errors.push(err / scale);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-3, "{errors:?}");
}

#[test]
fn explicit_predation_overshoot_is_reported() {
    let g = Grid::unit_square(10).unwrap();
    let b = experiment1_operator(&g).unwrap();
    let s = SystemParams {
        d1: 1e-2,
        r: Field::constant(&g, 1.0),
        rho: Field::constant(&g, 1.0),
        predator: uniform(&g, &b, 1.0),
    };
    let ts = TimeScheme::new(1.0, 36).unwrap();
    let one = Field::constant(&g, 1.0);
    let err = solve_full_system(&s, &one, &one, &ts).unwrap_err();
    assert!(
        matches!(err, regctl_core::Error::NegativeState { field: "h", .. }),
        "{err:?}"
    );
}

#[test]
fn zero_direction_gives_zero_linearization() {
    let g = Grid::unit_square(8).unwrap();
    let b = InteractionOperator::identity(&g);
    let ts = TimeScheme::new(1.0, 10).unwrap();
    let one = Field::constant(&g, 1.0);
    let phi = Field::from_fn(&g, |x, _| x - 0.5);
    let mut p = uniform(&g, &b, 1.0);
    p.control = LevelSet::new(phi.clone(), 0.1).unwrap().heaviside();
    let y = solve_state(&p, &one, &one, &ts).unwrap();
    let z = solve_linearized(&p, &y, &phi, &Field::zeros(&g), 0.1, &one, &ts).unwrap();
    assert!(z.fields.iter().all(|f| f.norm_inf() == 0.0));
}

#[test]
fn predator_stays_below_linear_bound_and_prey_below_capacity() {
    let g = Grid::unit_square(14).unwrap();
    // explicit predation needs dt |B p| < 1 to keep the prey nonnegative
    let b = InteractionOperator::nonlocal_from_fn(&g, |p, q| 0.5 + p.0 * q.1).unwrap();
    let r = Field::from_fn(&g, |x, _| 1.0 + 0.5 * (PI * x).sin());
    let rho = Field::constant(&g, 1.0);
    let k = solve_logistic_steady(&r, &rho, 1e-2, 1e-12).unwrap();
    let mut predator = uniform(&g, &b, 1.0);
    predator.control = left_half(&g);
    let s = SystemParams {
        d1: 1e-2,
        r,
        rho,
        predator: predator.clone(),
    };
    let ts = TimeScheme::new(1.0, 36).unwrap().with_krylov_tol(1e-12);
    let h0 = k.map(|v| 0.9 * v);
    let p0 = Field::from_fn(&g, |x, y| 0.5 + 0.5 * x * y);
    let (h, p) = solve_full_system(&s, &h0, &p0, &ts).unwrap();
    let y = solve_state(&predator, &p0, &k, &ts).unwrap();
    let bound = f64::max(h0.norm_inf(), k.norm_inf());
    for n in 0..=ts.n_steps {
        assert!(p.at(n).min() >= -1e-8 && h.at(n).min() >= -1e-8);
        let gap = p.at(n).zip_map(y.at(n), |a, b| a - b).unwrap().max();
        assert!(gap <= 1e-8 * y.at(n).norm_inf().max(1.0), "step {n}: {gap}");
        assert!(h.at(n).max() <= bound + 1e-8);
    }
}

#[test]
fn controlled_predator_decays_at_the_principal_rate() {
    let g = Grid::unit_square(16).unwrap();
    let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
    let mut predator = uniform(&g, &b, 1.0);
    predator.control = left_half(&g);
    let lambda = principal_eigenpair(
        &EigenSetup {
            d2: predator.d,
            a: predator.a.clone(),
            gamma: 1.0,
            omega_indicator: predator.control.clone(),
            c0: 1.0,
            k: Field::constant(&g, 1.0),
            b: &b,
            eps: 0.0,
        },
        1e-10,
    )
    .unwrap()
    .lambda1;
    assert!(lambda > 0.0);
    let one = Field::constant(&g, 1.0);
    let ts = TimeScheme::new(5.0, 180).unwrap().with_krylov_tol(1e-12);
    let y = solve_state(&predator, &one, &one, &ts).unwrap();
    let sup = y.sup_series();
    let half = ts.n_steps / 2;
    let rate = -(sup[ts.n_steps].ln() - sup[half].ln()) / (y.time(ts.n_steps) - y.time(half));
    assert!(rate >= 0.9 * lambda, "rate {rate} vs lambda {lambda}");
}
