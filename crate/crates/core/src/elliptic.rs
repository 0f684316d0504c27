//! Steady Neumann problems: the linear resolvent solve
//! `-d Lap psi + eta psi - s K (B psi) = f` and the logistic carrying
//! capacity `-d1 Lap K = r K - rho K^2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Field, Grid};
use crate::interaction::InteractionOperator;
use crate::krylov::{gmres, KrylovConfig, LinearOperator};
use crate::{Error, Result};

/// Which way the coupling term is composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingOrder {
    /// `K (B psi)`
    Forward,
    /// `B* (K psi)`, the adjoint of the forward term.
    Adjoint,
}

#[derive(Debug, Clone)]
pub struct Coupling<'a> {
    pub k: Field,
    pub b: &'a InteractionOperator,
    pub scale: f64,
    pub order: CouplingOrder,
}

#[derive(Debug, Clone)]
pub struct EllipticProblem<'a> {
    pub d: f64,
    pub eta: Field,
    pub coupling: Option<Coupling<'a>>,
    pub rhs: Field,
}

/// Matrix-free `psi -> -d Lap psi + eta psi - s K (B psi)` (or its adjoint form).
pub struct EllipticOperator<'p, 'a> {
    grid: Grid,
    d: f64,
    eta: &'p Field,
    coupling: Option<&'p Coupling<'a>>,
}

impl<'p, 'a> EllipticOperator<'p, 'a> {
    pub fn new(d: f64, eta: &'p Field, coupling: Option<&'p Coupling<'a>>) -> Self {
        EllipticOperator {
            grid: *eta.grid(),
            d,
            eta,
            coupling,
        }
    }
}

impl LinearOperator for EllipticOperator<'_, '_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.grid.laplacian_into(x, out);
        for ((o, e), xi) in out.iter_mut().zip(self.eta.values()).zip(x) {
            *o = -self.d * *o + e * xi;
        }
        if let Some(c) = self.coupling {
            let mut tmp = vec![0.0; x.len()];
            match c.order {
                CouplingOrder::Forward => {
                    c.b.apply_into(x, &mut tmp);
                    for ((o, t), k) in out.iter_mut().zip(&tmp).zip(c.k.values()) {
                        *o -= c.scale * k * t;
                    }
                }
                CouplingOrder::Adjoint => {
                    let kx: Vec<f64> = c.k.values().iter().zip(x).map(|(k, v)| k * v).collect();
                    c.b.apply_adjoint_into(&kx, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o -= c.scale * t;
                    }
                }
            }
        }
    }
}

impl EllipticProblem<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::param("d", "diffusion must be positive"));
        }
        self.eta.check_same_grid(&self.rhs)?;
        if let Some(c) = &self.coupling {
            c.k.check_same_grid(&self.eta)?;
            if c.b.grid() != self.eta.grid() {
                return Err(Error::GridMismatch);
            }
            let bound = match c.order {
                CouplingOrder::Forward => c.b.row_sum_norm(),
                CouplingOrder::Adjoint => c.b.adjoint_row_sum_norm(),
            };
            if self.eta.min() <= c.scale.abs() * c.k.norm_inf() * bound {
                return Err(Error::param(
                    "eta",
                    "zeroth-order coefficient must dominate the coupling term",
                ));
            }
        }
        Ok(())
    }
}

/// Solve the resolvent problem with GMRES to relative residual `tol`.
pub fn solve_linear_elliptic(p: &EllipticProblem<'_>, tol: f64) -> Result<Field> {
    p.validate()?;
    let op = EllipticOperator::new(p.d, &p.eta, p.coupling.as_ref());
    let sol = gmres(&op, p.rhs.values(), None, &KrylovConfig::with_tol(tol))?;
    Ok(Field::from_raw(p.eta.grid(), sol.x))
}

const NEWTON_MAX_STEPS: usize = 60;
const MAX_HALVINGS: usize = 40;

fn logistic_residual(k: &[f64], r: &Field, rho: &Field, d1: f64, grid: &Grid) -> Vec<f64> {
    let mut lap = vec![0.0; k.len()];
    grid.laplacian_into(k, &mut lap);
    lap.iter()
        .zip(k)
        .zip(r.values().iter().zip(rho.values()))
        .map(|((l, kv), (rv, pv))| -d1 * l - rv * kv + pv * kv * kv)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Maximal positive steady state of the logistic equation with Neumann data.
///
/// Damped Newton started from `r / rho`; the result has max-norm residual at
/// most `tol` and is strictly positive.
pub fn solve_logistic_steady(r: &Field, rho: &Field, d1: f64, tol: f64) -> Result<Field> {
    r.check_same_grid(rho)?;
    if !(d1 > 0.0) {
        return Err(Error::param("d1", "diffusion must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "tolerance must be positive"));
    }
    if !(r.min() > 0.0) {
        return Err(Error::param(
            "r",
            "growth rate must be bounded below by a positive constant",
        ));
    }
    if !(rho.min() > 0.0) {
        return Err(Error::param("rho", "logistic coefficient must be positive"));
    }
    let grid = *r.grid();
    let mut k: Vec<f64> = r.values().iter().zip(rho.values()).map(|(a, b)| a / b).collect();
    let mut res = logistic_residual(&k, r, rho, d1, &grid);
    let mut res_norm = max_abs(&res);
    let inner = KrylovConfig::with_tol(1e-12);

    let mut steps = 0;
    while res_norm > tol {
        if steps == NEWTON_MAX_STEPS {
            return Err(Error::NewtonDiverged {
                iterations: steps,
                residual: res_norm,
            });
        }
        steps += 1;
        let eta = Field::from_raw(
            &grid,
            k.iter()
                .zip(r.values().iter().zip(rho.values()))
                .map(|(kv, (rv, pv))| 2.0 * pv * kv - rv)
                .collect(),
        );
        let jac = EllipticOperator::new(d1, &eta, None);
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let step = gmres(&jac, &neg, None, &inner)?.x;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = k.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let trial_res = logistic_residual(&trial, r, rho, d1, &grid);
            let n = max_abs(&trial_res);
            if n < res_norm {
                k = trial;
                res = trial_res;
                res_norm = n;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations: steps,
                residual: res_norm,
            });
        }
    }

    let field = Field::from_raw(&grid, k);
    if !field.is_finite() {
        return Err(Error::NonFinite("carrying capacity"));
    }
    let min = field.min();
    if min <= 0.0 {
        return Err(Error::WrongBranch { min });
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn identity_coupling_reduces_to_constant() {
        let g = Grid::unit_square(9).unwrap();
        let b = InteractionOperator::identity(&g);
        let p = EllipticProblem {
            d: 1.0,
            eta: Field::constant(&g, 2.0),
            coupling: Some(Coupling {
                k: Field::constant(&g, 1.0),
                b: &b,
                scale: 1.0,
                order: CouplingOrder::Forward,
            }),
            rhs: Field::constant(&g, 1.0),
        };
        let psi = solve_linear_elliptic(&p, 1e-12).unwrap();
        assert!(psi.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn nonlocal_constant_kernel_with_eta_two() {
        let g = Grid::unit_square(8).unwrap();
        let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
        let p = EllipticProblem {
            d: 1.0,
            eta: Field::constant(&g, 2.0),
            coupling: Some(Coupling {
                k: Field::constant(&g, 1.0),
                b: &b,
                scale: 1.0,
                order: CouplingOrder::Forward,
            }),
            rhs: Field::constant(&g, 1.0),
        };
        let psi = solve_linear_elliptic(&p, 1e-12).unwrap();
        assert!(psi.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn coercivity_violation_rejected() {
        let g = Grid::unit_square(5).unwrap();
        let b = InteractionOperator::nonlocal_from_fn(&g, |_, _| 1.0).unwrap();
        let p = EllipticProblem {
            d: 1.0,
            eta: Field::constant(&g, 1.0),
            coupling: Some(Coupling {
                k: Field::constant(&g, 1.0),
                b: &b,
                scale: 1.0,
                order: CouplingOrder::Forward,
            }),
            rhs: Field::constant(&g, 1.0),
        };
        assert!(matches!(
            solve_linear_elliptic(&p, 1e-8),
            Err(Error::InvalidParameter { name: "eta", .. })
        ));
    }

    #[test]
    fn manufactured_cosine() {
        let g = Grid::unit_square(33).unwrap();
        let p = EllipticProblem {
            d: 1.0,
            eta: Field::constant(&g, 1.0),
            coupling: None,
            rhs: Field::from_fn(&g, |x, _| (1.0 + PI * PI) * libm::cos(PI * x)),
        };
        let psi = solve_linear_elliptic(&p, 1e-12).unwrap();
        let exact = Field::from_fn(&g, |x, _| libm::cos(PI * x));
        let err = psi.zip_map(&exact, |a, b| a - b).unwrap().norm_inf();
        // O(dx^2) with dx = 1/32
        assert!(err < 3e-3, "error {err}");
    }

    #[test]
    fn logistic_constant_coefficients() {
        let g = Grid::unit_square(10).unwrap();
        let k = solve_logistic_steady(&Field::constant(&g, 1.0), &Field::constant(&g, 2.0), 0.1, 1e-12).unwrap();
        assert!(k.values().iter().all(|v| (v - 0.5).abs() < 1e-8));
        let k = solve_logistic_steady(&Field::constant(&g, 3.0), &Field::constant(&g, 0.7), 0.1, 1e-12).unwrap();
        assert!(k.values().iter().all(|v| (v - 3.0 / 0.7).abs() < 1e-8));
    }

    #[test]
    fn logistic_rejects_bad_coefficients() {
        let g = Grid::unit_square(5).unwrap();
        let one = Field::constant(&g, 1.0);
        assert!(solve_logistic_steady(&Field::constant(&g, 0.0), &one, 0.1, 1e-8).is_err());
        assert!(solve_logistic_steady(&one, &Field::constant(&g, -1.0), 0.1, 1e-8).is_err());
        assert!(solve_logistic_steady(&one, &one, 0.0, 1e-8).is_err());
    }
}
