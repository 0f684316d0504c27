//! Principal eigenpair of
//!
//! ```text
//! -d2 Lap psi + (a + gamma m) psi - c0 (K + eps) (B psi) = lambda psi,   d_nu psi = 0
//! ```
//!
//! The operator is not self-adjoint when `B` is a general kernel. After a
//! shift that makes the zeroth-order part dominate the coupling, its inverse
//! is a positive operator, and power iteration on that inverse converges to
//! the positive eigenfunction. The sign of `lambda_1` decides whether the
//! feedback `u = -gamma p` on `omega` eradicates the predator.

use alloc::vec::Vec;

use crate::elliptic::{Coupling, CouplingOrder, EllipticOperator};
use crate::grid::Field;
use crate::interaction::InteractionOperator;
use crate::krylov::{gmres, KrylovConfig, LinearOperator};
use crate::{Error, Result};

const MAX_POWER_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct EigenSetup<'a> {
    pub d2: f64,
    pub a: Field,
    pub gamma: f64,
    /// `chi_omega` or a mollified indicator, values in `[0, 1]`.
    pub omega_indicator: Field,
    pub c0: f64,
    pub k: Field,
    pub b: &'a InteractionOperator,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Positive eigenfunction with unit weighted L2 norm.
    pub psi1: Field,
    pub iterations: usize,
    /// Max-norm eigen-residual `|A psi - lambda psi|`.
    pub residual: f64,
}

impl EigenSetup<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.d2 > 0.0) {
            return Err(Error::param("d2", "diffusion must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", "control rate must be >= 0"));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::param("eps", "perturbation must be >= 0"));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::param("c0", "conversion rate must be positive"));
        }
        self.a.check_same_grid(&self.k)?;
        self.a.check_same_grid(&self.omega_indicator)?;
        if self.b.grid() != self.a.grid() {
            return Err(Error::GridMismatch);
        }
        if self.omega_indicator.min() < 0.0 || self.omega_indicator.max() > 1.0 {
            return Err(Error::param("omega_indicator", "values must lie in [0, 1]"));
        }
        if self.k.min() < 0.0 {
            return Err(Error::param("K", "carrying capacity must be >= 0"));
        }
        Ok(())
    }

    /// `a + gamma m`
    fn potential(&self) -> Field {
        let gamma = self.gamma;
        self.a
            .zip_map(&self.omega_indicator, |a, m| a + gamma * m)
            .expect("grids checked")
    }

    fn coupling(&self, order: CouplingOrder) -> Coupling<'_> {
        let eps = self.eps;
        Coupling {
            k: self.k.map(|v| v + eps),
            b: self.b,
            scale: self.c0,
            order,
        }
    }

    /// `max(0, c0 |K + eps| |B| - min(a + gamma m)) + 1`
    fn shift(&self, order: CouplingOrder) -> f64 {
        let b_norm = match order {
            CouplingOrder::Forward => self.b.row_sum_norm(),
            CouplingOrder::Adjoint => self.b.adjoint_row_sum_norm(),
        };
        let bound = self.c0 * (self.k.norm_inf() + self.eps) * b_norm;
        f64::max(0.0, bound - self.potential().min()) + 1.0
    }
}

fn power_iteration(s: &EigenSetup<'_>, tol: f64, order: CouplingOrder) -> Result<EigenPair> {
    s.validate()?;
    if !(tol > 0.0) {
        return Err(Error::param("tol", "tolerance must be positive"));
    }
    let grid = *s.a.grid();
    let shift = s.shift(order);
    let base = s.potential();
    let shifted = base.map(|v| v + shift);
    let coupling = s.coupling(order);
    let resolvent = EllipticOperator::new(s.d2, &shifted, Some(&coupling));
    let unshifted = EllipticOperator::new(s.d2, &base, Some(&coupling));
    let mut a_psi = alloc::vec![0.0; grid.len()];
    let mut residual: f64;
    let inner = KrylovConfig::with_tol(f64::max(tol * 1e-3, 1e-14));

    let mut psi = Field::constant(&grid, 1.0);
    psi.scale(1.0 / psi.norm_l2());
    let mut mu = 1.0;
    let mut lambda = f64::NAN;
    let mut last_delta = f64::NAN;
    let mut iterations = 0;

    loop {
        if iterations == MAX_POWER_ITERATIONS {
            return Err(Error::Stagnation { iterations, lambda });
        }
        iterations += 1;
        // R psi is close to mu psi once the direction has settled
        let guess: Vec<f64> = psi.values().iter().map(|v| v * mu).collect();
        let next = gmres(&resolvent, psi.values(), Some(&guess), &inner)?.x;
        let next = Field::from_raw(&grid, next);
        mu = psi.inner(&next)?;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::PositivityLost { min: next.min() });
        }
        let estimate = 1.0 / mu - shift;
        psi = next;
        psi.scale(1.0 / psi.norm_l2());

        let delta = estimate - lambda;
        lambda = estimate;
        if iterations >= 3 && delta.is_finite() {
            // Aitken-style estimate of the remaining error for a linearly
            // converging sequence.
            let q = (delta / last_delta).abs();
            let remaining = if q < 1.0 {
                delta.abs() * q / (1.0 - q)
            } else {
                f64::INFINITY
            };
            // the estimate 1/mu - shift carries noise of order shift * inner
            // tolerance, so both tests scale with |lambda|
            let scaled = tol * f64::max(1.0, lambda.abs());
            if (delta.abs() < scaled && remaining < scaled) || delta == 0.0 {
                residual = eigen_residual(&unshifted, &psi, lambda, &mut a_psi);
                if residual <= scaled {
                    break;
                }
            }
        }
        last_delta = delta;
    }

    let min = psi.min();
    if min <= 0.0 {
        return Err(Error::PositivityLost { min });
    }

    Ok(EigenPair {
        lambda1: lambda,
        psi1: psi,
        iterations,
        residual,
    })
}

/// `max |A psi - lambda psi|`
fn eigen_residual(a: &EllipticOperator<'_, '_>, psi: &Field, lambda: f64, scratch: &mut [f64]) -> f64 {
    a.apply(psi.values(), scratch);
    scratch
        .iter()
        .zip(psi.values())
        .fold(0.0, |m, (ap, p)| f64::max(m, (ap - lambda * p).abs()))
}

/// Principal eigenvalue and positive eigenfunction, converged so that both
/// the estimated eigenvalue error and the max-norm eigen-residual are below
/// `tol * max(1, |lambda|)`.
pub fn principal_eigenpair(s: &EigenSetup<'_>, tol: f64) -> Result<EigenPair> {
    power_iteration(s, tol, CouplingOrder::Forward)
}

/// Principal eigenvalue of the adjoint problem
/// `-d2 Lap psi + (a + gamma m) psi - c0 B*((K + eps) psi) = lambda psi`.
pub fn adjoint_principal_eigenvalue(s: &EigenSetup<'_>, tol: f64) -> Result<f64> {
    power_iteration(s, tol, CouplingOrder::Adjoint).map(|p| p.lambda1)
}

/// `lambda_1` for each control rate in an ascending list.
pub fn eigen_gamma_sweep(s: &EigenSetup<'_>, gammas: &[f64], tol: f64) -> Result<Vec<(f64, f64)>> {
    if gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::param("gammas", "control rates must be >= 0"));
    }
    if gammas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("gammas", "control rates must be sorted ascending"));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let setup = EigenSetup { gamma, ..s.clone() };
            principal_eigenpair(&setup, tol).map(|p| (gamma, p.lambda1))
        })
        .collect()
}
