//! The predation/infection operator `B` and its adjoint.
//!
//! Two realizations are supported: a pointwise multiplication `c(x) y(x)`
//! and a kernel integral `int k(x, x') y(x') dx'`. The kernel is sampled at
//! node pairs and integrated with the trapezoidal weights, so that with
//! `<u, v> = sum_k w_k u_k v_k` the adjoint is exactly the weighted transpose:
//! `<B y, v> = <y, B* v>` holds to rounding.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Field, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum InteractionOperator {
    /// `(B y)(x) = c(x) y(x)` with `c >= 0`.
    Local { c: Field },
    /// `(B y)(x_i) = sum_j k(x_i, x_j) w_j y_j`, kernel stored dense and row-major.
    Nonlocal {
        grid: Grid,
        kernel: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl InteractionOperator {
    pub fn local(c: Field) -> Result<Self> {
        if !c.is_finite() || c.min() < 0.0 {
            return Err(Error::param(
                "c",
                "local interaction coefficient must be finite and >= 0",
            ));
        }
        Ok(InteractionOperator::Local { c })
    }

    /// `B = I`.
    pub fn identity(grid: &Grid) -> Self {
        InteractionOperator::Local {
            c: Field::constant(grid, 1.0),
        }
    }

    /// Sample `kernel((x, y), (x', y'))` at every node pair.
    pub fn nonlocal_from_fn(grid: &Grid, mut kernel: impl FnMut((f64, f64), (f64, f64)) -> f64) -> Result<Self> {
        let n = grid.len();
        let points: Vec<(f64, f64)> = (0..n).map(|k| grid.point(k)).collect();
        let mut matrix = Vec::with_capacity(n * n);
        for &p in &points {
            for &q in &points {
                let v = kernel(p, q);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::param("kernel", "kernel values must be finite and >= 0"));
                }
                matrix.push(v);
            }
        }
        Ok(InteractionOperator::Nonlocal {
            grid: *grid,
            kernel: matrix,
            weights: grid.weights(),
        })
    }

    /// Kernel `k(x, x') = |f(x) g(x')|`, the form used by the bundled experiments.
    pub fn nonlocal_product(grid: &Grid, f: impl Fn(f64, f64) -> f64, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.len();
        let fv: Vec<f64> = (0..n).map(|k| grid.point(k)).map(|(x, y)| f(x, y)).collect();
        let gv: Vec<f64> = (0..n).map(|k| grid.point(k)).map(|(x, y)| g(x, y)).collect();
        let mut matrix = Vec::with_capacity(n * n);
        for a in &fv {
            for b in &gv {
                let v = (a * b).abs();
                if !v.is_finite() {
                    return Err(Error::param("kernel", "kernel values must be finite"));
                }
                matrix.push(v);
            }
        }
        Ok(InteractionOperator::Nonlocal {
            grid: *grid,
            kernel: matrix,
            weights: grid.weights(),
        })
    }

    pub fn grid(&self) -> &Grid {
        match self {
            InteractionOperator::Local { c } => c.grid(),
            InteractionOperator::Nonlocal { grid, .. } => grid,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, InteractionOperator::Local { .. })
    }

    /// Kernel value `k(x_i, x_j)`; for the local case the diagonal matrix entry.
    pub fn kernel_at(&self, i: usize, j: usize) -> f64 {
        match self {
            InteractionOperator::Local { c } => {
                if i == j {
                    c[i]
                } else {
                    0.0
                }
            }
            InteractionOperator::Nonlocal { grid, kernel, .. } => kernel[i * grid.len() + j],
        }
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            InteractionOperator::Local { c } => {
                for ((o, ci), yi) in out.iter_mut().zip(c.values()).zip(y) {
                    *o = ci * yi;
                }
            }
            InteractionOperator::Nonlocal { grid, kernel, weights } => {
                let n = grid.len();
                let wy: Vec<f64> = weights.iter().zip(y).map(|(w, v)| w * v).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &kernel[i * n..(i + 1) * n];
                    *o = row.iter().zip(&wy).map(|(k, v)| k * v).sum();
                }
            }
        }
    }

    pub fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        match self {
            InteractionOperator::Local { .. } => self.apply_into(w, out),
            InteractionOperator::Nonlocal { grid, kernel, weights } => {
                let n = grid.len();
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..n {
                    let s = weights[i] * w[i];
                    if s == 0.0 {
                        continue;
                    }
                    let row = &kernel[i * n..(i + 1) * n];
                    for (o, k) in out.iter_mut().zip(row) {
                        *o += k * s;
                    }
                }
            }
        }
    }

    pub fn apply(&self, y: &Field) -> Result<Field> {
        self.check_grid(y)?;
        let mut out = vec![0.0; y.len()];
        self.apply_into(y.values(), &mut out);
        Ok(Field::from_raw(y.grid(), out))
    }

    pub fn apply_adjoint(&self, w: &Field) -> Result<Field> {
        self.check_grid(w)?;
        let mut out = vec![0.0; w.len()];
        self.apply_adjoint_into(w.values(), &mut out);
        Ok(Field::from_raw(w.grid(), out))
    }

    /// Maximum absolute row sum of the discrete operator (its infinity norm).
    pub fn row_sum_norm(&self) -> f64 {
        match self {
            InteractionOperator::Local { c } => c.norm_inf(),
            InteractionOperator::Nonlocal { grid, kernel, weights } => {
                let n = grid.len();
                (0..n)
                    .map(|i| {
                        kernel[i * n..(i + 1) * n]
                            .iter()
                            .zip(weights)
                            .map(|(k, w)| k.abs() * w)
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Same quantity for the adjoint (maximum absolute column sum).
    pub fn adjoint_row_sum_norm(&self) -> f64 {
        match self {
            InteractionOperator::Local { c } => c.norm_inf(),
            InteractionOperator::Nonlocal { grid, kernel, weights } => {
                let n = grid.len();
                let mut sums = vec![0.0; n];
                for i in 0..n {
                    for (s, k) in sums.iter_mut().zip(&kernel[i * n..(i + 1) * n]) {
                        *s += k.abs() * weights[i];
                    }
                }
                sums.into_iter().fold(0.0, f64::max)
            }
        }
    }

    /// Dense row-major matrix of the discrete operator.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let n = self.grid().len();
        let mut m = vec![0.0; n * n];
        match self {
            InteractionOperator::Local { c } => {
                for i in 0..n {
                    m[i * n + i] = c[i];
                }
            }
            InteractionOperator::Nonlocal { kernel, weights, .. } => {
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = kernel[i * n + j] * weights[j];
                    }
                }
            }
        }
        m
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() == self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `B y`.
pub fn apply(b: &InteractionOperator, y: &Field) -> Result<Field> {
    b.apply(y)
}

/// `B* w`.
pub fn apply_adjoint(b: &InteractionOperator, w: &Field) -> Result<Field> {
    b.apply_adjoint(w)
}
