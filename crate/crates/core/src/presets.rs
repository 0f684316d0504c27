//! Closed-form coefficient fields of the two reference experiments.
//!
//! Both use a product kernel `k(x, x') = |k1(x) k2(x')|` on the unit square,
//! the initial state `y0 = 1` and the same initial level-set function.

use core::f64::consts::PI;

use libm::{cos, exp, sin};

use crate::grid::{Field, Grid};
use crate::interaction::InteractionOperator;
use crate::Result;

/// `phi0 = exp(-3 (x - 1/2)^2 - 3 (y - 1/2)^2) + sin(3 pi x) sin(5 pi y) - 3/4`
pub fn initial_phi(x: f64, y: f64) -> f64 {
    exp(-3.0 * (x - 0.5) * (x - 0.5) - 3.0 * (y - 0.5) * (y - 0.5)) + sin(3.0 * PI * x) * sin(5.0 * PI * y) - 0.75
}

pub fn initial_phi_field(grid: &Grid) -> Field {
    Field::from_fn(grid, initial_phi)
}

pub fn experiment1_k1(x: f64, y: f64) -> f64 {
    x * x * sin(PI * x) + y * y * sin(PI * y)
}

pub fn experiment1_k2(x: f64, y: f64) -> f64 {
    100.0 * (x * x * cos(PI * x) + y * y * cos(PI * y))
}

pub fn experiment2_k1(x: f64, y: f64) -> f64 {
    let u = x - y;
    500.0 * sin(3.0 * PI * x) * cos(5.0 * PI * y) * exp(-(u - 0.2) * (u - 0.2) - 3.0 * (u - 0.8) * (u - 0.8))
}

pub fn experiment2_k2(x: f64, y: f64) -> f64 {
    500.0 * sin(5.0 * PI * x) * cos(3.0 * PI * y) * exp(-5.0 * (x - 0.2) * (x - 0.2) - (y - 0.8) * (y - 0.8))
}

/// `|k1(x) k2(x')|` for the first experiment.
pub fn experiment1_kernel(p: (f64, f64), q: (f64, f64)) -> f64 {
    (experiment1_k1(p.0, p.1) * experiment1_k2(q.0, q.1)).abs()
}

pub fn experiment2_kernel(p: (f64, f64), q: (f64, f64)) -> f64 {
    (experiment2_k1(p.0, p.1) * experiment2_k2(q.0, q.1)).abs()
}

pub fn experiment1_operator(grid: &Grid) -> Result<InteractionOperator> {
    InteractionOperator::nonlocal_product(grid, experiment1_k1, experiment1_k2)
}

pub fn experiment2_operator(grid: &Grid) -> Result<InteractionOperator> {
    InteractionOperator::nonlocal_product(grid, experiment2_k1, experiment2_k2)
}

/// Indicator of the left half `{x < 1/2}` of the unit square (nodes on the
/// midline excluded).
pub fn left_half(grid: &Grid) -> Field {
    let mid = 0.5 * (grid.bounds().x_min + grid.bounds().x_max);
    Field::from_fn(grid, |x, _| if x < mid { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_hand_evaluation() {
        // k1(1/2, 1/2) = 2 * 0.25 * 1
        assert!((experiment1_k1(0.5, 0.5) - 0.5).abs() < 1e-15);
        // k2(1, 0) = 100 * (1 * cos(pi)) = -100
        assert!((experiment1_k2(1.0, 0.0) + 100.0).abs() < 1e-12);
        assert!((experiment1_kernel((0.5, 0.5), (1.0, 0.0)) - 50.0).abs() < 1e-12);
        // k1 at (1/6, 0): sin(pi/2) cos(0) exp(-(1/6-0.2)^2 - 3(1/6-0.8)^2)
        let u: f64 = 1.0 / 6.0;
        let expect = 500.0 * libm::exp(-(u - 0.2) * (u - 0.2) - 3.0 * (u - 0.8) * (u - 0.8));
        assert!((experiment2_k1(u, 0.0) - expect).abs() < 1e-10);
        // k2 at (0.1, 0): sin(pi/2) * 1 * exp(-5 * 0.01 - 0.64)
        let expect = 500.0 * libm::exp(-0.05 - 0.64);
        assert!((experiment2_k2(0.1, 0.0) - expect).abs() < 1e-10);
    }

    #[test]
    fn initial_phi_at_centre() {
        // exp(0) + sin(1.5 pi) sin(2.5 pi) - 0.75 = 1 - 1 - 0.75
        assert!((initial_phi(0.5, 0.5) + 0.75).abs() < 1e-12);
        assert!((initial_phi(0.0, 0.0) - (libm::exp(-1.5) - 0.75)).abs() < 1e-12);
    }
}
