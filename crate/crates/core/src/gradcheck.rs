//! Finite-difference verification of the shape derivative.
//!
//! The analytic directional derivative `int G psi dx` is compared against the
//! forward difference `(J(phi + s psi) - J(phi)) / s`, and the damage part is
//! cross-checked through the duality between the linearized state and the
//! adjoint:
//!
//! ```text
//! int_0^T int K (B z) dx dt = theta gamma int_0^T int delta_sigma(phi) psi r y dx dt
//! ```
//!
//! where the right-hand side carries the sign of the adjoint convention used
//! by [`solve_adjoint`](crate::dynamics::solve_adjoint) (`r <= 0`, forcing
//! `-gamma delta psi y`).

use crate::dynamics::{solve_adjoint, solve_linearized, solve_state, PredatorParams, TimeScheme, Trajectory};
use crate::grid::Field;
use crate::interaction::InteractionOperator;
use crate::shape::{
    cost_components, mollified_delta, shape_derivative_from_trajectories, CostBreakdown, CostWeights, LevelSet,
};
use crate::Result;

/// Everything that fixes `J` as a function of `phi`.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    pub d: f64,
    pub a: Field,
    pub c0: f64,
    pub gamma: f64,
    pub b: &'a InteractionOperator,
    pub k: Field,
    pub y0: Field,
    pub sigma: f64,
    pub weights: CostWeights,
    pub scheme: TimeScheme,
    pub eps_reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalCheck {
    /// `int G psi dx`
    pub analytic: f64,
    /// `(J(phi + s psi) - J(phi)) / s`
    pub finite_difference: f64,
    /// `|analytic - finite_difference| / |analytic|`
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    /// Damage derivative through the linearized state.
    pub linearized: f64,
    /// Same quantity through the adjoint.
    pub adjoint: f64,
    /// `|linearized - adjoint| / max(|linearized|, |adjoint|)`
    pub relative_error: f64,
}

fn relative(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / scale
    }
}

impl CostModel<'_> {
    fn params(&self, ls: &LevelSet) -> PredatorParams<'_> {
        PredatorParams {
            d: self.d,
            a: self.a.clone(),
            c0: self.c0,
            gamma: self.gamma,
            b: self.b,
            control: ls.heaviside(),
        }
    }

    fn level_set(&self, phi: &Field) -> Result<LevelSet> {
        LevelSet::new(phi.clone(), self.sigma)
    }

    /// State trajectory for `phi`.
    pub fn state(&self, phi: &Field) -> Result<Trajectory> {
        let ls = self.level_set(phi)?;
        solve_state(&self.params(&ls), &self.y0, &self.k, &self.scheme)
    }

    pub fn cost(&self, phi: &Field) -> Result<CostBreakdown> {
        let ls = self.level_set(phi)?;
        let y = solve_state(&self.params(&ls), &self.y0, &self.k, &self.scheme)?;
        cost_components(&ls, &y, &self.k, self.b, &self.weights)
    }

    /// Shape derivative density `G` at `phi`.
    pub fn gradient(&self, phi: &Field) -> Result<Field> {
        let ls = self.level_set(phi)?;
        let params = self.params(&ls);
        let y = solve_state(&params, &self.y0, &self.k, &self.scheme)?;
        let r = solve_adjoint(&params, &self.k, &self.scheme)?;
        shape_derivative_from_trajectories(&ls, &y, &r, &self.weights, self.gamma, self.eps_reg)
    }

    pub fn directional_check(&self, phi: &Field, psi: &Field, s: f64) -> Result<DirectionalCheck> {
        let g = self.gradient(phi)?;
        let analytic = g.inner(psi)?;
        let mut moved = phi.clone();
        moved.axpy(s, psi)?;
        let finite_difference = (self.cost(&moved)?.j_total - self.cost(phi)?.j_total) / s;
        Ok(DirectionalCheck {
            analytic,
            finite_difference,
            relative_error: relative(analytic, finite_difference, analytic.abs()),
        })
    }

    /// Both sides of the duality identity for the damage term (theta = 1).
    pub fn duality_check(&self, phi: &Field, psi: &Field) -> Result<DualityCheck> {
        let ls = self.level_set(phi)?;
        let params = self.params(&ls);
        let ts = &self.scheme;
        let y = solve_state(&params, &self.y0, &self.k, ts)?;
        let z = solve_linearized(&params, &y, phi, psi, self.sigma, &self.k, ts)?;
        let r = solve_adjoint(&params, &self.k, ts)?;

        let bk = self.b.apply_adjoint(&self.k)?;
        let mut linearized = 0.0;
        for n in 0..z.len() {
            linearized += ts.trapezoid_weight(n) * bk.inner(z.at(n))?;
        }

        let sigma = self.sigma;
        let weight = phi.zip_map(psi, |p, v| mollified_delta(p, sigma) * v)?;
        let mut adjoint = 0.0;
        for n in 1..y.len() {
            let ry = r.at(n).zip_map(y.at(n), |a, b| a * b)?;
            adjoint += ts.dt * weight.inner(&ry)?;
        }
        adjoint *= self.gamma;

        let scale = f64::max(linearized.abs(), adjoint.abs());
        Ok(DualityCheck {
            linearized,
            adjoint,
            relative_error: relative(linearized, adjoint, scale),
        })
    }
}
