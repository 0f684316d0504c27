//! Level-set description of the control region `omega = {phi > 0}`, the
//! mollified area and perimeter functionals, the total cost, its shape
//! derivative and one step of the descent flow.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dynamics::Trajectory;
use crate::grid::{Field, Grid};
use crate::interaction::InteractionOperator;
use crate::krylov::{gmres, KrylovConfig, LinearOperator};
use crate::{Error, Result};

/// `H_sigma(s) = (1 + (2/pi) atan(s / sigma)) / 2`
#[inline]
pub fn mollified_heaviside(s: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + 2.0 / PI * libm::atan(s / sigma))
}

/// `delta_sigma(s) = sigma / (pi (sigma^2 + s^2))`, the derivative of [`mollified_heaviside`].
#[inline]
pub fn mollified_delta(s: f64, sigma: f64) -> f64 {
    sigma / (PI * (sigma * sigma + s * s))
}

/// Regularization of `|grad phi|` used when none is configured:
/// `1e-8 * diameter / dx`.
pub fn default_eps_reg(grid: &Grid) -> f64 {
    1e-8 * grid.bounds().diameter() / grid.dx().min(grid.dy())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub phi: Field,
    pub sigma: f64,
}

impl LevelSet {
    pub fn new(phi: Field, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param("sigma", "mollifier width must be positive"));
        }
        if !phi.is_finite() {
            return Err(Error::NonFinite("level-set function"));
        }
        Ok(LevelSet { phi, sigma })
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    /// `H_sigma(phi)`, the smooth control indicator.
    pub fn heaviside(&self) -> Field {
        let s = self.sigma;
        self.phi.map(|v| mollified_heaviside(v, s))
    }

    pub fn delta(&self) -> Field {
        let s = self.sigma;
        self.phi.map(|v| mollified_delta(v, s))
    }

    /// Sharp indicator of `omega = {phi > 0}`.
    pub fn region_mask(&self) -> Field {
        self.phi.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CostWeights {
    pub fn new(theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        let w = CostWeights { theta, alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.theta), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, "cost weights must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn total(&self, j_damage: f64, j_area: f64, j_perimeter: f64) -> f64 {
        self.theta * j_damage + self.alpha * j_area + self.beta * j_perimeter
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            theta: 1.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub j_damage: f64,
    pub j_area: f64,
    pub j_perimeter: f64,
    pub j_total: f64,
}

impl CostBreakdown {
    pub fn new(j_damage: f64, j_area: f64, j_perimeter: f64, w: &CostWeights) -> Self {
        CostBreakdown {
            j_damage,
            j_area,
            j_perimeter,
            j_total: w.total(j_damage, j_area, j_perimeter),
        }
    }
}

/// Face-centred `1 / |grad phi|_reg` for the compact curvature stencil.
struct FaceCoefficients {
    grid: Grid,
    /// `(nx - 1) * ny` entries, face `(i + 1/2, j)` at `j * (nx - 1) + i`.
    x_faces: Vec<f64>,
    /// `nx * (ny - 1)` entries, face `(i, j + 1/2)` at `j * nx + i`.
    y_faces: Vec<f64>,
}

impl FaceCoefficients {
    fn new(phi: &Field, eps_reg: f64) -> Self {
        let grid = *phi.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let (dx, dy) = (grid.dx(), grid.dy());
        let v = phi.values();
        // central differences with mirrored ghosts (zero on the edges)
        let cdx = |i: usize, j: usize| -> f64 {
            if i == 0 || i + 1 == nx {
                0.0
            } else {
                (v[j * nx + i + 1] - v[j * nx + i - 1]) / (2.0 * dx)
            }
        };
        let cdy = |i: usize, j: usize| -> f64 {
            if j == 0 || j + 1 == ny {
                0.0
            } else {
                (v[(j + 1) * nx + i] - v[(j - 1) * nx + i]) / (2.0 * dy)
            }
        };
        let reg = |px: f64, py: f64| 1.0 / libm::sqrt(px * px + py * py + eps_reg * eps_reg);

        let mut x_faces = Vec::with_capacity((nx - 1) * ny);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let px = (v[j * nx + i + 1] - v[j * nx + i]) / dx;
                let py = 0.5 * (cdy(i, j) + cdy(i + 1, j));
                x_faces.push(reg(px, py));
            }
        }
        let mut y_faces = Vec::with_capacity(nx * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx {
                let py = (v[(j + 1) * nx + i] - v[j * nx + i]) / dy;
                let px = 0.5 * (cdx(i, j) + cdx(i, j + 1));
                y_faces.push(reg(px, py));
            }
        }
        FaceCoefficients { grid, x_faces, y_faces }
    }

    /// `div(c grad u)` with zero flux through the domain boundary.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let ix2 = 1.0 / (self.grid.dx() * self.grid.dx());
        let iy2 = 1.0 / (self.grid.dy() * self.grid.dy());
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut sx = 0.0;
                if i + 1 < nx {
                    sx += self.x_faces[j * (nx - 1) + i] * (u[k + 1] - u[k]);
                }
                if i > 0 {
                    sx -= self.x_faces[j * (nx - 1) + i - 1] * (u[k] - u[k - 1]);
                }
                // boundary nodes own half a cell
                if i == 0 || i + 1 == nx {
                    sx *= 2.0;
                }
                let mut sy = 0.0;
                if j + 1 < ny {
                    sy += self.y_faces[j * nx + i] * (u[k + nx] - u[k]);
                }
                if j > 0 {
                    sy -= self.y_faces[(j - 1) * nx + i] * (u[k] - u[k - nx]);
                }
                if j == 0 || j + 1 == ny {
                    sy *= 2.0;
                }
                out[k] = sx * ix2 + sy * iy2;
            }
        }
    }
}

/// `div(grad phi / sqrt(|grad phi|^2 + eps_reg^2))`.
///
/// The regularized unit normal is formed at the nodes with central
/// differences (one-sided on the edges) and differentiated again the same
/// way, so affine `phi` gives zero everywhere including the boundary.
pub fn curvature_term(phi: &Field, eps_reg: f64) -> Field {
    let grid = *phi.grid();
    let n = grid.len();
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
    grid.gradient_into(phi.values(), &mut gx, &mut gy);
    for (a, b) in gx.iter_mut().zip(gy.iter_mut()) {
        let norm = libm::sqrt(*a * *a + *b * *b + eps_reg * eps_reg);
        *a /= norm;
        *b /= norm;
    }
    let (mut dxx, mut scratch) = (vec![0.0; n], vec![0.0; n]);
    grid.gradient_into(&gx, &mut dxx, &mut scratch);
    let mut dyy = vec![0.0; n];
    grid.gradient_into(&gy, &mut scratch, &mut dyy);
    Field::from_raw(&grid, dxx.iter().zip(&dyy).map(|(a, b)| a + b).collect())
}

/// Damage, area and perimeter parts of the cost for the state `y` solved with `phi`.
///
/// The damage is `int_0^T int K (B y) dx dt` with trapezoids in time and space.
pub fn cost_components(
    ls: &LevelSet,
    y: &Trajectory,
    k: &Field,
    b: &InteractionOperator,
    w: &CostWeights,
) -> Result<CostBreakdown> {
    w.validate()?;
    if y.is_empty() {
        return Err(Error::TrajectoryMismatch("empty state trajectory"));
    }
    k.check_same_grid(&ls.phi)?;
    y.first().check_same_grid(&ls.phi)?;
    // <K, B y> = <B* K, y> exactly in the weighted inner product
    let g = b.apply_adjoint(k)?;
    let last = y.n_steps();
    let mut j_damage = 0.0;
    for (n, f) in y.fields.iter().enumerate() {
        let tw = if n == 0 || n == last { 0.5 * y.dt } else { y.dt };
        j_damage += tw * g.inner(f)?;
    }
    let (j_area, j_perimeter) = geometry_terms(ls);
    Ok(CostBreakdown::new(j_damage, j_area, j_perimeter, w))
}

/// `(int H_sigma(phi), int delta_sigma(phi) |grad phi|)`
pub fn geometry_terms(ls: &LevelSet) -> (f64, f64) {
    let j_area = ls.heaviside().integrate();
    let grad = ls.phi.gradient_magnitude();
    let sigma = ls.sigma;
    let j_perimeter = ls
        .phi
        .zip_map(&grad, |p, g| mollified_delta(p, sigma) * g)
        .expect("same grid")
        .integrate();
    (j_area, j_perimeter)
}

/// `int_0^T r y dt`, summed over the snapshots `t_1..t_N` to match the
/// implicit forcing of the linearized state.
pub fn ry_integral(r: &Trajectory, y: &Trajectory) -> Result<Field> {
    if r.len() != y.len() || r.is_empty() {
        return Err(Error::TrajectoryMismatch("adjoint and state lengths differ"));
    }
    r.first().check_same_grid(y.first())?;
    let grid = *y.grid();
    let mut acc = vec![0.0; grid.len()];
    for n in 1..y.len() {
        for ((a, rv), yv) in acc.iter_mut().zip(r.at(n).values()).zip(y.at(n).values()) {
            *a += y.dt * rv * yv;
        }
    }
    Ok(Field::from_raw(&grid, acc))
}

/// Density `G` of the shape derivative, `dJ(phi)(psi) = int G psi dx`:
///
/// `G = delta_sigma(phi) [theta gamma int r y dt + alpha - beta curvature(phi)]`
pub fn shape_derivative_density(ls: &LevelSet, ry: &Field, w: &CostWeights, gamma: f64, eps_reg: f64) -> Result<Field> {
    w.validate()?;
    ry.check_same_grid(&ls.phi)?;
    let curv = if w.beta != 0.0 {
        curvature_term(&ls.phi, eps_reg)
    } else {
        Field::zeros(ls.grid())
    };
    let sigma = ls.sigma;
    let values = (0..ls.phi.len())
        .map(|i| mollified_delta(ls.phi[i], sigma) * (w.theta * gamma * ry[i] + w.alpha - w.beta * curv[i]))
        .collect();
    Ok(Field::from_raw(ls.grid(), values))
}

/// Shape derivative density straight from the state and adjoint trajectories.
pub fn shape_derivative_from_trajectories(
    ls: &LevelSet,
    y: &Trajectory,
    r: &Trajectory,
    w: &CostWeights,
    gamma: f64,
    eps_reg: f64,
) -> Result<Field> {
    let ry = ry_integral(r, y)?;
    shape_derivative_density(ls, &ry, w, gamma, eps_reg)
}

/// `x -> x - s0 beta delta div(c grad x)`
struct CurvatureStep<'a> {
    faces: &'a FaceCoefficients,
    coef: Vec<f64>,
}

impl LinearOperator for CurvatureStep<'_> {
    fn dim(&self) -> usize {
        self.coef.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.faces.apply(x, out);
        for ((o, c), xi) in out.iter_mut().zip(&self.coef).zip(x) {
            *o = xi - c * *o;
        }
    }
}

/// One artificial-time step of length `s0` of the descent flow
///
/// `phi_s = delta_sigma(phi) [-theta gamma int r y dt - alpha + beta curvature(phi)]`.
///
/// The velocity is evaluated at the current `phi`; the curvature part is
/// additionally linearized around it and the increment is solved implicitly
/// with the compact operator `div(grad . / |grad phi|)` and zero normal flux
/// on the boundary. For `beta = 0` the step is the explicit formula.
pub fn descent_step(
    ls: &LevelSet,
    ry: &Field,
    w: &CostWeights,
    gamma: f64,
    s0: f64,
    eps_reg: f64,
    krylov: &KrylovConfig,
) -> Result<LevelSet> {
    if !(s0 > 0.0) {
        return Err(Error::param("s0", "artificial time step must be positive"));
    }
    let g = shape_derivative_density(ls, ry, w, gamma, eps_reg)?;
    let explicit: Vec<f64> = g.values().iter().map(|v| -s0 * v).collect();

    let increment = if w.beta == 0.0 {
        explicit
    } else {
        let faces = FaceCoefficients::new(&ls.phi, eps_reg);
        let sigma = ls.sigma;
        let coef = ls
            .phi
            .values()
            .iter()
            .map(|p| s0 * w.beta * mollified_delta(*p, sigma))
            .collect();
        let op = CurvatureStep { faces: &faces, coef };
        gmres(&op, &explicit, None, krylov)?.x
    };

    let phi: Vec<f64> = ls.phi.values().iter().zip(&increment).map(|(p, d)| p + d).collect();
    LevelSet::new(Field::from_raw(ls.grid(), phi), ls.sigma)
}
