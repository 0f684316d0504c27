//! Semi-implicit time integration of the prey-predator system, the linear
//! predator bound (state) equation, its linearization with respect to the
//! level-set function, and the backward adjoint.
//!
//! Every step treats diffusion and the local zeroth-order terms implicitly and
//! evaluates the interaction and nonlinear terms at the previous step:
//!
//! ```text
//! (I - dt d Lap + dt (a + gamma m)) y^{n+1} = y^n + dt c0 K (B y^n)
//! ```
//!
//! The adjoint recursion is the exact transpose of this recursion in the
//! weighted inner product, with the damage functional integrated by the
//! trapezoidal rule in time. With that choice the duality identity between
//! the linearized state and the adjoint holds to solver tolerance.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Field, Grid};
use crate::interaction::InteractionOperator;
use crate::krylov::{gmres, KrylovConfig, LinearOperator};
use crate::shape::mollified_delta;
use crate::{Error, Result};

/// Uniform time grid `t_n = n dt`, `n = 0..=n_steps`, plus the linear solver
/// settings used for every implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScheme {
    pub dt: f64,
    pub n_steps: usize,
    pub krylov: KrylovConfig,
}

impl TimeScheme {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("n_steps", "at least one step is required"));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::param("t_final", "horizon must be positive"));
        }
        Ok(TimeScheme {
            dt: t_final / n_steps as f64,
            n_steps,
            krylov: KrylovConfig::default(),
        })
    }

    pub fn with_krylov_tol(mut self, tol: f64) -> Self {
        self.krylov.tol = tol;
        self
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Trapezoidal weight of snapshot `n`.
    pub fn trapezoid_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.n_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.n_steps == 0 {
            return Err(Error::param("dt", "time step must be positive"));
        }
        Ok(())
    }
}

/// Coefficients of the predator-type linear equations.
#[derive(Debug, Clone)]
pub struct PredatorParams<'a> {
    /// Predator diffusion `d2`.
    pub d: f64,
    pub a: Field,
    pub c0: f64,
    pub gamma: f64,
    pub b: &'a InteractionOperator,
    /// Control indicator `m` in `[0, 1]`: `chi_omega` or `H_sigma(phi)`.
    pub control: Field,
}

impl PredatorParams<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::param("d2", "diffusion must be positive"));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::param("c0", "conversion rate must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", "control rate must be >= 0"));
        }
        self.a.check_same_grid(&self.control)?;
        if self.b.grid() != self.a.grid() {
            return Err(Error::GridMismatch);
        }
        if self.control.min() < 0.0 || self.control.max() > 1.0 {
            return Err(Error::param("control", "indicator values must lie in [0, 1]"));
        }
        Ok(())
    }

    fn implicit_operator(&self, dt: f64) -> ImplicitStep {
        let gamma = self.gamma;
        ImplicitStep {
            grid: *self.a.grid(),
            diffusion: dt * self.d,
            diag: self
                .a
                .values()
                .iter()
                .zip(self.control.values())
                .map(|(a, m)| 1.0 + dt * (a + gamma * m))
                .collect(),
        }
    }
}

/// Full prey-predator system with the feedback `u = -gamma p` on `omega`.
#[derive(Debug, Clone)]
pub struct SystemParams<'a> {
    /// Prey diffusion.
    pub d1: f64,
    pub r: Field,
    pub rho: Field,
    pub predator: PredatorParams<'a>,
}

impl SystemParams<'_> {
    fn validate(&self) -> Result<()> {
        self.predator.validate()?;
        if !(self.d1 > 0.0) {
            return Err(Error::param("d1", "diffusion must be positive"));
        }
        self.r.check_same_grid(&self.predator.a)?;
        self.rho.check_same_grid(&self.predator.a)?;
        if !(self.r.min() > 0.0) {
            return Err(Error::param("r", "growth rate must be positive"));
        }
        if !(self.rho.min() > 0.0) {
            return Err(Error::param("rho", "logistic coefficient must be positive"));
        }
        Ok(())
    }
}

/// Snapshots at `t = 0, dt, ..., T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub fields: Vec<Field>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.fields.len().saturating_sub(1)
    }

    pub fn at(&self, n: usize) -> &Field {
        &self.fields[n]
    }

    pub fn first(&self) -> &Field {
        &self.fields[0]
    }

    pub fn last(&self) -> &Field {
        &self.fields[self.fields.len() - 1]
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    /// `max_x f(x, t_n)` for every snapshot.
    pub fn sup_series(&self) -> Vec<f64> {
        self.fields.iter().map(Field::max).collect()
    }
}

/// `x -> diag * x - diffusion * Lap x`
struct ImplicitStep {
    grid: Grid,
    diffusion: f64,
    diag: Vec<f64>,
}

impl LinearOperator for ImplicitStep {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.grid.laplacian_into(x, out);
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi - self.diffusion * *o;
        }
    }
}

fn check_state(field: &'static str, step: usize, values: &[f64], floor: f64) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(field));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -floor {
        return Err(Error::NegativeState {
            field,
            step,
            value: min,
        });
    }
    Ok(())
}

fn check_finite(field: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(field))
    }
}

fn negativity_floor(initial: &Field) -> f64 {
    1e-8 * f64::max(initial.norm_inf(), f64::MIN_POSITIVE)
}

/// Linear predator bound with control indicator `m`:
/// `y_t - d Lap y = -a y + c0 K (B y) - gamma m y`, `y(0) = y0`.
pub fn solve_state(p: &PredatorParams<'_>, y0: &Field, k: &Field, ts: &TimeScheme) -> Result<Trajectory> {
    p.validate()?;
    ts.validate()?;
    y0.check_same_grid(&p.a)?;
    k.check_same_grid(&p.a)?;
    if y0.min() < 0.0 {
        return Err(Error::param("y0", "initial state must be >= 0"));
    }
    let grid = *y0.grid();
    let n = grid.len();
    let op = p.implicit_operator(ts.dt);
    let floor = negativity_floor(y0);
    let scale = ts.dt * p.c0;

    let mut fields = Vec::with_capacity(ts.n_steps + 1);
    fields.push(y0.clone());
    let mut by = vec![0.0; n];
    for step in 1..=ts.n_steps {
        let prev = fields[step - 1].values();
        p.b.apply_into(prev, &mut by);
        let rhs: Vec<f64> = prev
            .iter()
            .zip(&by)
            .zip(k.values())
            .map(|((y, b), kv)| y + scale * kv * b)
            .collect();
        let next = gmres(&op, &rhs, Some(prev), &ts.krylov)?.x;
        check_state("y", step, &next, floor)?;
        fields.push(Field::from_raw(&grid, next));
    }
    Ok(Trajectory { dt: ts.dt, fields })
}

/// Prey-predator system with feedback control, returning `(h, p)`.
pub fn solve_full_system(
    s: &SystemParams<'_>,
    h0: &Field,
    p0: &Field,
    ts: &TimeScheme,
) -> Result<(Trajectory, Trajectory)> {
    s.validate()?;
    ts.validate()?;
    h0.check_same_grid(&s.r)?;
    p0.check_same_grid(&s.r)?;
    if h0.min() < 0.0 || p0.min() < 0.0 {
        return Err(Error::param("h0/p0", "initial densities must be >= 0"));
    }
    let grid = *h0.grid();
    let n = grid.len();
    let dt = ts.dt;
    let pp = &s.predator;
    let p_op = pp.implicit_operator(dt);
    let h_op = ImplicitStep {
        grid,
        diffusion: dt * s.d1,
        diag: s.r.values().iter().map(|r| 1.0 - dt * r).collect(),
    };
    let h_floor = negativity_floor(h0);
    let p_floor = negativity_floor(p0);

    let mut hs = Vec::with_capacity(ts.n_steps + 1);
    let mut ps = Vec::with_capacity(ts.n_steps + 1);
    hs.push(h0.clone());
    ps.push(p0.clone());
    let mut bp = vec![0.0; n];
    for step in 1..=ts.n_steps {
        let h = hs[step - 1].values();
        let p = ps[step - 1].values();
        pp.b.apply_into(p, &mut bp);
        let h_rhs: Vec<f64> = (0..n)
            .map(|i| h[i] - dt * s.rho[i] * h[i] * h[i] - dt * h[i] * bp[i])
            .collect();
        let p_rhs: Vec<f64> = (0..n).map(|i| p[i] + dt * pp.c0 * h[i] * bp[i]).collect();
        let h_next = gmres(&h_op, &h_rhs, Some(h), &ts.krylov)?.x;
        let p_next = gmres(&p_op, &p_rhs, Some(p), &ts.krylov)?.x;
        check_state("h", step, &h_next, h_floor)?;
        check_state("p", step, &p_next, p_floor)?;
        hs.push(Field::from_raw(&grid, h_next));
        ps.push(Field::from_raw(&grid, p_next));
    }
    Ok((Trajectory { dt, fields: hs }, Trajectory { dt, fields: ps }))
}

/// Derivative of the state in the level-set direction `psi_dir`.
///
/// `p.control` must be `H_sigma(phi)`. The forcing
/// `-gamma delta_sigma(phi) y psi_dir` enters at the new time level, so this
/// is the exact derivative of the discrete forward map. The initial value is
/// `z(0) = 0` because the initial state does not depend on `phi`.
pub fn solve_linearized(
    p: &PredatorParams<'_>,
    y: &Trajectory,
    phi: &Field,
    psi_dir: &Field,
    sigma: f64,
    k: &Field,
    ts: &TimeScheme,
) -> Result<Trajectory> {
    p.validate()?;
    ts.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "mollifier width must be positive"));
    }
    if y.len() != ts.n_steps + 1 {
        return Err(Error::TrajectoryMismatch("state length differs from the time scheme"));
    }
    phi.check_same_grid(&p.a)?;
    psi_dir.check_same_grid(&p.a)?;
    k.check_same_grid(&p.a)?;
    y.first().check_same_grid(&p.a)?;

    let grid = *phi.grid();
    let n = grid.len();
    let op = p.implicit_operator(ts.dt);
    let scale = ts.dt * p.c0;
    let forcing: Vec<f64> = phi
        .values()
        .iter()
        .zip(psi_dir.values())
        .map(|(f, s)| -ts.dt * p.gamma * mollified_delta(*f, sigma) * s)
        .collect();

    let mut fields = Vec::with_capacity(ts.n_steps + 1);
    fields.push(Field::zeros(&grid));
    let mut bz = vec![0.0; n];
    for step in 1..=ts.n_steps {
        let prev = fields[step - 1].values();
        p.b.apply_into(prev, &mut bz);
        let y_next = y.at(step).values();
        let rhs: Vec<f64> = (0..n)
            .map(|i| prev[i] + scale * k[i] * bz[i] + forcing[i] * y_next[i])
            .collect();
        let next = gmres(&op, &rhs, Some(prev), &ts.krylov)?.x;
        check_finite("z", &next)?;
        fields.push(Field::from_raw(&grid, next));
    }
    Ok(Trajectory { dt: ts.dt, fields })
}

/// Backward adjoint of the damage functional `int_0^T int K (B y)`.
///
/// Solves, from the terminal time down to `t = 0`,
///
/// ```text
/// (I - dt d Lap + dt (a + gamma m)) r^n = r^{n+1} + dt c0 B*(K r^{n+1}) - w_n B*K
/// ```
///
/// with `r^{N+1} = 0` and `w_n` the trapezoidal time weights. This is the
/// discretization of `r_t + d Lap r = a r - c0 B*(K r) + gamma m r + B*K`,
/// `r(T) = 0`, that is exactly adjoint to [`solve_state`]. `p.control` must be
/// the indicator used for the forward solve.
pub fn solve_adjoint(p: &PredatorParams<'_>, k: &Field, ts: &TimeScheme) -> Result<Trajectory> {
    p.validate()?;
    ts.validate()?;
    k.check_same_grid(&p.a)?;
    let grid = *k.grid();
    let n = grid.len();
    let op = p.implicit_operator(ts.dt);
    let scale = ts.dt * p.c0;
    let source = p.b.apply_adjoint(k)?;

    let mut rev: Vec<Field> = Vec::with_capacity(ts.n_steps + 1);
    let mut next = vec![0.0; n];
    let mut kr = vec![0.0; n];
    let mut bkr = vec![0.0; n];
    for step in (0..=ts.n_steps).rev() {
        for ((o, kv), r) in kr.iter_mut().zip(k.values()).zip(&next) {
            *o = kv * r;
        }
        p.b.apply_adjoint_into(&kr, &mut bkr);
        let w = ts.trapezoid_weight(step);
        let rhs: Vec<f64> = (0..n).map(|i| next[i] + scale * bkr[i] - w * source[i]).collect();
        let cur = gmres(&op, &rhs, Some(&next), &ts.krylov)?.x;
        check_finite("r", &cur)?;
        rev.push(Field::from_raw(&grid, cur.clone()));
        next = cur;
    }
    rev.reverse();
    Ok(Trajectory { dt: ts.dt, fields: rev })
}
