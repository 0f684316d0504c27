//! Outer loop updating the level-set function of the control region.
//!
//! Each iteration solves the state for the current `phi`, evaluates the
//! cost, stops if the cost has settled, solves the adjoint, moves `phi` by
//! one descent step of length `s0` and finally checks the shape increment and
//! the iteration budget.

use alloc::vec::Vec;

use crate::dynamics::{solve_adjoint, solve_state, PredatorParams, TimeScheme};
use crate::elliptic::solve_logistic_steady;
use crate::grid::Field;
use crate::interaction::InteractionOperator;
use crate::shape::{cost_components, default_eps_reg, descent_step, ry_integral, CostBreakdown, CostWeights, LevelSet};
use crate::{Error, Result};

/// Initial value of the previous cost, larger than any reachable cost.
pub const INITIAL_COST_SENTINEL: f64 = 1e30;

/// Where the carrying capacity comes from.
#[derive(Debug, Clone)]
pub enum CarryingCapacity {
    Prescribed(Field),
    /// Solve the logistic steady state.
    Logistic {
        r: Field,
        rho: Field,
        d1: f64,
        tol: f64,
    },
}

impl CarryingCapacity {
    pub fn resolve(&self) -> Result<Field> {
        match self {
            CarryingCapacity::Prescribed(k) => {
                if k.min() < 0.0 {
                    return Err(Error::param("K", "carrying capacity must be >= 0"));
                }
                Ok(k.clone())
            }
            CarryingCapacity::Logistic { r, rho, d1, tol } => solve_logistic_steady(r, rho, *d1, *tol),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig<'a> {
    pub maxiter: usize,
    /// Cost increment tolerance.
    pub eps1: f64,
    /// Shape increment tolerance.
    pub eps2: f64,
    /// Artificial time step of the descent flow.
    pub s0: f64,
    pub sigma: f64,
    /// `|grad phi|` regularization; `None` uses [`default_eps_reg`].
    pub eps_reg: Option<f64>,
    pub weights: CostWeights,
    pub scheme: TimeScheme,
    pub d: f64,
    pub a: Field,
    pub c0: f64,
    pub gamma: f64,
    pub b: &'a InteractionOperator,
    pub phi0: Field,
    pub y0: Field,
    pub carrying_capacity: CarryingCapacity,
    /// Keep `phi` every `snapshot_stride` iterations (0 keeps only the first and last).
    pub snapshot_stride: usize,
}

impl OptimizerConfig<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.maxiter == 0 {
            return Err(Error::param("maxiter", "at least one iteration is required"));
        }
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("s0", self.s0),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if let Some(e) = self.eps_reg {
            if !(e > 0.0) {
                return Err(Error::param("eps_reg", "must be positive"));
            }
        }
        self.weights.validate()?;
        self.phi0.check_same_grid(&self.a)?;
        self.y0.check_same_grid(&self.a)?;
        Ok(())
    }

    fn eps_reg(&self) -> f64 {
        self.eps_reg.unwrap_or_else(|| default_eps_reg(self.a.grid()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CostConverged,
    ShapeConverged,
    MaxIterReached,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::CostConverged => "cost_converged",
            StopReason::ShapeConverged => "shape_converged",
            StopReason::MaxIterReached => "maxiter_reached",
        }
    }

    pub fn is_converged(&self) -> bool {
        !matches!(self, StopReason::MaxIterReached)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

/// `|phi_new - phi_old|_{L2} / area`
pub fn shape_increment(prev_phi: &Field, cur_phi: &Field) -> Result<f64> {
    let diff = cur_phi.zip_map(prev_phi, |a, b| a - b)?;
    Ok(diff.norm_l2() / diff.grid().area())
}

/// Stopping test in the order cost, shape, iteration budget.
///
/// `iter` is the 1-based number of the iteration that would run next, so the
/// loop ends once `iter > maxiter`.
pub fn check_stopping(
    prev_j: f64,
    cur_j: f64,
    prev_phi: &Field,
    cur_phi: &Field,
    iter: usize,
    cfg: &OptimizerConfig<'_>,
) -> Result<StopDecision> {
    if (cur_j - prev_j).abs() < cfg.eps1 {
        return Ok(StopDecision::Stop(StopReason::CostConverged));
    }
    if shape_increment(prev_phi, cur_phi)? < cfg.eps2 {
        return Ok(StopDecision::Stop(StopReason::ShapeConverged));
    }
    if iter > cfg.maxiter {
        return Ok(StopDecision::Stop(StopReason::MaxIterReached));
    }
    Ok(StopDecision::Continue)
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// Cost of `phi^(k)` for `k = 0..iterations_run`.
    pub history: Vec<CostBreakdown>,
    /// `(k, phi^(k))` at the snapshot stride, always including the first and last.
    pub phi_snapshots: Vec<(usize, LevelSet)>,
    pub stop_reason: StopReason,
    pub iterations_run: usize,
    pub final_phi: LevelSet,
    /// State at the final time for the last evaluated `phi`.
    pub final_state: Field,
    /// Adjoint at `t = 0` for the last `phi` whose adjoint was solved.
    pub final_adjoint: Option<Field>,
    pub carrying_capacity: Field,
}

/// Solver failure inside the loop, with everything computed before it.
#[derive(Debug, Clone)]
pub struct OptimizationFailure {
    pub error: Error,
    pub history: Vec<CostBreakdown>,
    pub phi_snapshots: Vec<(usize, LevelSet)>,
    pub iterations_run: usize,
}

impl core::fmt::Display for OptimizationFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "optimization aborted after {} iterations: {}",
            self.iterations_run, self.error
        )
    }
}

impl core::error::Error for OptimizationFailure {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Progress {
    history: Vec<CostBreakdown>,
    snapshots: Vec<(usize, LevelSet)>,
}

impl Progress {
    fn fail(self, error: Error) -> OptimizationFailure {
        OptimizationFailure {
            error,
            iterations_run: self.history.len(),
            history: self.history,
            phi_snapshots: self.snapshots,
        }
    }
}

pub fn run_optimization(cfg: &OptimizerConfig<'_>) -> core::result::Result<OptimizationResult, OptimizationFailure> {
    let mut progress = Progress {
        history: Vec::new(),
        snapshots: Vec::new(),
    };
    macro_rules! tri {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => return Err(progress.fail(err)),
            }
        };
    }

    tri!(cfg.validate());
    let k = tri!(cfg.carrying_capacity.resolve());
    let eps_reg = cfg.eps_reg();
    let mut phi = tri!(LevelSet::new(cfg.phi0.clone(), cfg.sigma));
    progress.snapshots.push((0, phi.clone()));
    let mut prev_j = INITIAL_COST_SENTINEL;
    let mut final_adjoint = None;

    loop {
        let params = PredatorParams {
            d: cfg.d,
            a: cfg.a.clone(),
            c0: cfg.c0,
            gamma: cfg.gamma,
            b: cfg.b,
            control: phi.heaviside(),
        };
        let y = tri!(solve_state(&params, &cfg.y0, &k, &cfg.scheme));
        let cost = tri!(cost_components(&phi, &y, &k, cfg.b, &cfg.weights));
        progress.history.push(cost);
        let done = progress.history.len();

        // `phi_index` is the iteration index k of the returned phi^(k)
        let finish = |reason: StopReason, progress: Progress, phi: LevelSet, phi_index: usize, adj: Option<Field>| {
            let mut snapshots = progress.snapshots;
            if snapshots.last().map(|s| s.0) != Some(phi_index) {
                snapshots.push((phi_index, phi.clone()));
            }
            OptimizationResult {
                history: progress.history,
                phi_snapshots: snapshots,
                stop_reason: reason,
                iterations_run: done,
                final_phi: phi,
                final_state: y.last().clone(),
                final_adjoint: adj,
                carrying_capacity: k.clone(),
            }
        };

        if (cost.j_total - prev_j).abs() < cfg.eps1 {
            // phi^(done - 1) is final; it was not moved in this iteration
            return Ok(finish(
                StopReason::CostConverged,
                progress,
                phi,
                done - 1,
                final_adjoint,
            ));
        }

        let r = tri!(solve_adjoint(&params, &k, &cfg.scheme));
        let ry = tri!(ry_integral(&r, &y));
        final_adjoint = Some(r.first().clone());
        let next = tri!(descent_step(
            &phi,
            &ry,
            &cfg.weights,
            cfg.gamma,
            cfg.s0,
            eps_reg,
            &cfg.scheme.krylov
        ));
        let decision = tri!(check_stopping(prev_j, cost.j_total, &phi.phi, &next.phi, done + 1, cfg));
        phi = next;
        prev_j = cost.j_total;
        if cfg.snapshot_stride > 0 && done.is_multiple_of(cfg.snapshot_stride) {
            progress.snapshots.push((done, phi.clone()));
        }
        if let StopDecision::Stop(reason) = decision {
            return Ok(finish(reason, progress, phi, done, final_adjoint));
        }
    }
}
