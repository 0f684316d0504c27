//! Unpreconditioned GMRES for matrix-free operators. A single Krylov cycle
//! normally suffices; a new cycle starts only to correct round-off drift.
//!
//! Convergence is measured by the relative residual `|b - Ax| / |b|` in the
//! Euclidean norm, the same criterion as Matlab's `gmres`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A square linear map applied without storing a matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means ten times the system size.
    pub max_iter: Option<usize>,
}

impl KrylovConfig {
    pub const fn with_tol(tol: f64) -> Self {
        KrylovConfig { tol, max_iter: None }
    }

    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n).max(1)
    }
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig::with_tol(1e-3)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// One Arnoldi cycle on the residual `r` (norm `beta`) of at most `max_k`
/// steps, stopping once the Givens estimate meets `target`. Returns the
/// correction to add to the iterate and the number of steps taken.
fn arnoldi_cycle(op: &impl LinearOperator, r: &[f64], beta: f64, target: f64, max_k: usize) -> (Vec<f64>, usize) {
    let n = r.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    basis.push(r.iter().map(|v| v / beta).collect());
    // Columns of the upper Hessenberg matrix, already rotated.
    let mut h_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut w = vec![0.0; n];

    let mut k = 0;
    while k < max_k {
        op.apply(&basis[k], &mut w);
        let w_norm = norm(&w);
        let mut h = vec![0.0; k + 2];
        // modified Gram-Schmidt, twice for stability on nearly dependent bases
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i] += c;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= c * vj;
                }
            }
        }
        let h_next = norm(&w);
        h[k + 1] = h_next;

        for i in 0..k {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = libm::hypot(h[k], h[k + 1]);
        let (c, s) = if denom == 0.0 {
            (1.0, 0.0)
        } else {
            (h[k] / denom, h[k + 1] / denom)
        };
        cs.push(c);
        sn.push(s);
        h[k] = c * h[k] + s * h[k + 1];
        h[k + 1] = 0.0;
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        h_cols.push(h);
        k += 1;

        // an invariant subspace was found when A v_k lies in the basis
        if g[k].abs() <= target || h_next <= f64::EPSILON * w_norm {
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    // back substitution on the k x k triangular system
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h_cols[j][i] * y[j];
        }
        y[i] = if h_cols[i][i] != 0.0 { s / h_cols[i][i] } else { 0.0 };
    }
    let mut dx = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (dj, vj) in dx.iter_mut().zip(v) {
            *dj += yi * vj;
        }
    }
    (dx, k)
}

fn residual_into(op: &impl LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Solve `A x = b` starting from `x0` (zero when `None`).
///
/// The residual is recomputed from scratch after each Arnoldi cycle. When
/// it misses the target although the Givens estimate met it (the two drift
/// apart in floating point when the starting residual is large), a new cycle
/// starts from the current iterate. A cycle that fails to reduce the true
/// residual ends the solve with [`Error::NotConverged`].
pub fn gmres(op: &impl LinearOperator, b: &[f64], x0: Option<&[f64]>, cfg: &KrylovConfig) -> Result<Solution> {
    let n = op.dim();
    assert_eq!(b.len(), n, "right-hand side has the wrong length");

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    if !b_norm.is_finite() {
        return Err(Error::NonFinite("krylov right-hand side"));
    }

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let target = cfg.tol * b_norm;
    let max_iter = cfg.cap(n);
    let mut r = vec![0.0; n];
    let mut beta = residual_into(op, b, &x, &mut r);
    let mut iterations = 0;

    while beta > target {
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: beta / b_norm,
            });
        }
        let (dx, k) = arnoldi_cycle(op, &r, beta, target, max_iter - iterations);
        iterations += k;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("krylov iterate"));
        }
        let next = residual_into(op, b, &x, &mut r);
        if !(next < beta) && next > target {
            return Err(Error::NotConverged {
                iterations,
                residual: next / b_norm,
            });
        }
        beta = next;
    }

    Ok(Solution {
        x,
        iterations,
        residual: beta / b_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> impl LinearOperator {
        FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 4.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= 2.0 * x[i + 1];
                }
                y[i] = v;
            }
        })
    }

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let op = tridiag(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        op.apply(&exact, &mut b);
        let sol = gmres(&op, &b, None, &KrylovConfig::with_tol(1e-12)).unwrap();
        for (a, e) in sol.x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-9);
        }
        assert!(sol.residual < 1e-11);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = tridiag(5);
        let sol = gmres(&op, &[0.0; 5], None, &KrylovConfig::default()).unwrap();
        assert_eq!(sol.x, vec![0.0; 5]);
    }

    #[test]
    fn warm_start_at_solution_returns_immediately() {
        let op = tridiag(6);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut b = [0.0; 6];
        op.apply(&x, &mut b);
        let sol = gmres(&op, &b, Some(&x), &KrylovConfig::with_tol(1e-10)).unwrap();
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn poor_warm_start_still_meets_true_residual() {
        // diagonally dominated operator, guess nine orders too large
        let n = 30;
        let op = FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            let s: f64 = x.iter().enumerate().map(|(i, v)| (1.0 + i as f64) * v).sum();
            for i in 0..n {
                y[i] = 3.0e4 * x[i] - 50.0 * (1.0 + (i % 3) as f64) * s;
            }
        });
        let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let guess: Vec<f64> = b.iter().map(|v| v * 3.0e4).collect();
        let sol = gmres(&op, &b, Some(&guess), &KrylovConfig::with_tol(1e-12)).unwrap();
        let mut ax = vec![0.0; n];
        op.apply(&sol.x, &mut ax);
        let res = norm(&ax.iter().zip(&b).map(|(a, c)| a - c).collect::<Vec<_>>()) / norm(&b);
        assert!(res <= 1e-12, "{res}");
        assert_eq!(res, sol.residual);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let n = 40;
        let op = tridiag(n);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let cfg = KrylovConfig {
            tol: 1e-14,
            max_iter: Some(2),
        };
        match gmres(&op, &b, None, &cfg) {
            Err(Error::NotConverged { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
