//! Numerical laboratory for generalized Navier–Stokes flow of power-law
//! fluids in a truncated half-space with Navier slip on the plane.

// Index loops follow the formulas; `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod config;
pub mod constitutive;
pub mod domain;
pub mod experiments;
pub mod expr;
pub mod fem;
pub mod solver;
pub mod stokes_basis;
pub mod tensor;

pub use constitutive::{ConstitutiveError, Law, PPotential, StressHessian};
pub use domain::{Admissibility, DomainError, Grid, PressureField, VelocityField};
pub use tensor::{SymTensor, TensorError};
