//! Oblique projections onto spans of indicator actuators along spectral
//! complements of the 1D Laplacian, and the explicit feedback they induce for
//! parabolic equations under Dirichlet and Neumann boundary conditions.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] dense LU, cyclic Jacobi and SPD tridiagonal solves,
//! * [`quadrature`] composite Gauss-Legendre rules used by verification paths,
//! * [`spectral`] closed-form Laplacian eigenpairs on `(0, L)`,
//! * [`actuators`] the `mxe`, `uni`, `con` and custom actuator families,
//! * [`projection`] cross-Gram matrices, `Θ(c)`, operator norms and the
//!   oblique projector itself,
//! * [`fem`] the hat-function discretisation and the Crank-Nicolson
//!   closed-loop solver,
//! * [`csv`] the plain CSV emitters shared by the command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuators;
pub mod csv;
mod error;
pub mod fem;
pub mod linalg;
pub mod projection;
pub mod quadrature;
pub mod spectral;

pub use actuators::{ActuatorSet, Placement};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SymTriDiag};
pub use projection::{CrossGram, ProjectionData, SufficientConditionReport};
pub use spectral::{BoundaryCondition, EigenBasis};
