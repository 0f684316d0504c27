//! Uniform node-centred grids on a rectangle and scalar fields living on them.
//!
//! Nodes sit at `(x_min + i*dx, y_min + j*dy)` for `i < nx`, `j < ny`, so the
//! boundary nodes lie exactly on the edges of the rectangle. Values are stored
//! row-major with `x` varying fastest: node `(i, j)` lives at `j*nx + i`.
//!
//! Neumann conditions are imposed with mirrored ghost nodes. Together with the
//! trapezoidal weights this makes the discrete Laplacian symmetric in the
//! weighted inner product and gives exact discrete conservation.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const UNIT_SQUARE: Bounds = Bounds {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        libm::hypot(self.width(), self.height())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    bounds: Bounds,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, bounds: Bounds) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid("at least 3 nodes per axis are required"));
        }
        let finite = [bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(Error::InvalidGrid("bounds must enclose a positive area"));
        }
        Ok(Grid {
            nx,
            ny,
            bounds,
            dx: bounds.width() / (nx - 1) as f64,
            dy: bounds.height() / (ny - 1) as f64,
        })
    }

    /// `n x n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(n, n, Bounds::UNIT_SQUARE)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn area(&self) -> f64 {
        self.bounds.area()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Abscissa of column `i`. The last column is pinned to `x_max`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.bounds.x_max
        } else {
            self.bounds.x_min + i as f64 * self.dx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.bounds.y_max
        } else {
            self.bounds.y_min + j as f64 * self.dy
        }
    }

    /// Coordinates of node `k` in row-major order.
    #[inline]
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.x(k % self.nx), self.y(k / self.nx))
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = (k % self.nx, k / self.nx);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Trapezoidal quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight_at(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.dx * self.dy
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.push(self.weight_at(i, j));
            }
        }
        w
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut total = 0.0;
        for j in 0..self.ny {
            let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
            let row = &values[j * self.nx..(j + 1) * self.nx];
            let mut acc = 0.5 * (row[0] + row[self.nx - 1]);
            for v in &row[1..self.nx - 1] {
                acc += v;
            }
            total += wy * acc;
        }
        total * self.dx * self.dy
    }

    /// Weighted inner product `sum_k w_k a_k b_k`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let mut total = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.index(i, j);
                total += self.weight_at(i, j) * a[k] * b[k];
            }
        }
        total
    }

    /// Five-point Laplacian with mirrored ghost nodes (homogeneous Neumann).
    pub fn laplacian_into(&self, src: &[f64], dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.len());
        debug_assert_eq!(dst.len(), self.len());
        let (nx, ny) = (self.nx, self.ny);
        let ix2 = 1.0 / (self.dx * self.dx);
        let iy2 = 1.0 / (self.dy * self.dy);
        for j in 0..ny {
            let jm = if j == 0 { 1 } else { j - 1 };
            let jp = if j + 1 == ny { ny - 2 } else { j + 1 };
            for i in 0..nx {
                let im = if i == 0 { 1 } else { i - 1 };
                let ip = if i + 1 == nx { nx - 2 } else { i + 1 };
                let c = src[j * nx + i];
                let lx = (src[j * nx + im] - 2.0 * c + src[j * nx + ip]) * ix2;
                let ly = (src[jm * nx + i] - 2.0 * c + src[jp * nx + i]) * iy2;
                dst[j * nx + i] = lx + ly;
            }
        }
    }

    /// Central differences inside, one-sided differences on the boundary.
    pub fn gradient_into(&self, src: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                gx[k] = if i == 0 {
                    (src[k + 1] - src[k]) / self.dx
                } else if i + 1 == nx {
                    (src[k] - src[k - 1]) / self.dx
                } else {
                    (src[k + 1] - src[k - 1]) / (2.0 * self.dx)
                };
                gy[k] = if j == 0 {
                    (src[k + nx] - src[k]) / self.dy
                } else if j + 1 == ny {
                    (src[k] - src[k - nx]) / self.dy
                } else {
                    (src[k + nx] - src[k - nx]) / (2.0 * self.dy)
                };
            }
        }
    }
}

/// Nodal values of a scalar function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.point(k);
                f(x, y)
            })
            .collect();
        Field { grid: *grid, values }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid: *grid, values })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid: *grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, mut f: impl FnMut(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Discrete L2 norm with trapezoidal weights.
    pub fn norm_l2(&self) -> f64 {
        libm::sqrt(self.grid.inner(&self.values, &self.values))
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.grid.inner(&self.values, &other.values))
    }

    /// Neumann Laplacian of the field.
    pub fn laplacian(&self) -> Field {
        let mut out = vec![0.0; self.len()];
        self.grid.laplacian_into(&self.values, &mut out);
        Field::from_raw(&self.grid, out)
    }

    /// `|grad f|` with central differences inside and one-sided ones on the edges.
    pub fn gradient_magnitude(&self) -> Field {
        let n = self.len();
        let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
        self.grid.gradient_into(&self.values, &mut gx, &mut gy);
        let values = gx.iter().zip(&gy).map(|(a, b)| libm::hypot(*a, *b)).collect();
        Field::from_raw(&self.grid, values)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }
}

impl Index<usize> for Field {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Five-point Neumann Laplacian. See [`Grid::laplacian_into`].
pub fn apply_neumann_laplacian(f: &Field) -> Field {
    f.laplacian()
}

pub fn integrate(f: &Field) -> f64 {
    f.integrate()
}

pub fn gradient_magnitude(f: &Field) -> Field {
    f.gradient_magnitude()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn spacing_follows_node_count() {
        let g = Grid::unit_square(36).unwrap();
        assert!((g.dx() - 1.0 / 35.0).abs() < 1e-15);
        let g = Grid::unit_square(3).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.dy(), 0.5);
        let g = Grid::new(5, 3, Bounds::new(0.0, 2.0, 0.0, 1.0)).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.dy(), 0.5);
        assert_eq!(g.x(4), 2.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::unit_square(2).is_err());
        assert!(Grid::new(4, 4, Bounds::new(0.0, 0.0, 0.0, 1.0)).is_err());
        assert!(Grid::new(4, 4, Bounds::new(0.0, 1.0, 1.0, 0.5)).is_err());
        assert!(Grid::new(4, 4, Bounds::new(0.0, f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn quadrature_exact_on_constants_and_linears() {
        let g = Grid::unit_square(36).unwrap();
        assert!((Field::constant(&g, 1.0).integrate() - 1.0).abs() < 1e-14);
        assert!((Field::from_fn(&g, |x, _| x).integrate() - 0.5).abs() < 1e-14);
        let g = Grid::new(7, 4, Bounds::new(-1.0, 2.0, 0.0, 0.5)).unwrap();
        let f = Field::from_fn(&g, |x, y| 1.0 + 2.0 * x - y);
        // area 1.5, int x = 0.75, int y = 0.375
        let exact = 1.5 + 2.0 * 0.75 - 0.375;
        assert!((f.integrate() - exact).abs() < 1e-13, "{} vs {exact}", f.integrate());
    }

    #[test]
    fn sine_integral_converges() {
        let g = Grid::unit_square(65).unwrap();
        let v = Field::from_fn(&g, |x, _| libm::sin(PI * x)).integrate();
        assert!((v - 2.0 / PI).abs() < 5e-4);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid::unit_square(9).unwrap();
        let l = Field::constant(&g, 3.7).laplacian();
        assert!(l.norm_inf() < 1e-12);
    }

    #[test]
    fn gradient_magnitude_exact_on_linears() {
        let g = Grid::new(6, 5, Bounds::new(0.0, 1.0, 0.0, 2.0)).unwrap();
        let c = Field::constant(&g, 4.0).gradient_magnitude();
        assert!(c.norm_inf() < 1e-14);
        let l = Field::from_fn(&g, |x, _| x).gradient_magnitude();
        assert!(l.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let l = Field::from_fn(&g, |x, y| x + 2.0 * y).gradient_magnitude();
        assert!(l.values().iter().all(|v| (v - libm::sqrt(5.0)).abs() < 1e-12));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::zeros(&Grid::unit_square(4).unwrap());
        let b = Field::zeros(&Grid::unit_square(5).unwrap());
        assert_eq!(a.inner(&b), Err(Error::GridMismatch));
        assert!(Field::from_values(a.grid(), vec![0.0; 3]).is_err());
        assert!(Field::from_values(a.grid(), vec![f64::NAN; 16]).is_err());
    }
}
