//! Numerical core for the regional control of a predator (or infective)
//! population living on a rectangle with no-flux boundaries.
//!
//! The crate is `no_std` and only needs `alloc`. It contains
//!
//! * a uniform node-centred grid with Neumann stencils and trapezoidal
//!   quadrature ([`grid`]),
//! * the local and nonlocal interaction operators and their adjoints
//!   ([`interaction`]),
//! * an unrestarted GMRES solver ([`krylov`]),
//! * steady elliptic solves, including the logistic carrying capacity
//!   ([`elliptic`]),
//! * the principal eigenpair of the non-self-adjoint predator operator
//!   ([`spectral`]),
//! * semi-implicit forward, linearized and adjoint time integrators
//!   ([`dynamics`]),
//! * the level-set cost, its shape derivative and the descent flow
//!   ([`shape`]), with finite-difference checks in [`gradcheck`], and
//! * the outer shape optimization loop ([`optimizer`]).
//!
//! All inner products and integrals use the same trapezoidal weights, so
//! the discrete adjoints used for gradients are exact transposes of the
//! forward discretization.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod elliptic;
mod error;
pub mod gradcheck;
pub mod grid;
pub mod interaction;
pub mod krylov;
pub mod optimizer;
pub mod presets;
pub mod shape;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Bounds, Field, Grid};
pub use interaction::InteractionOperator;
