//! Truncated half-space geometry, nodal fields and the discrete operators
//! acting on them.

mod fields;
mod functionals;
mod grid;
mod ops;
mod project;
mod reflect;
mod snapshot;

pub use fields::{CellField, PressureField, PressureLocation, ScalarField, SymTensorField, VelocityField};
pub use functionals::{
    difference_quotient, korn_ratio, lp_norm, regularity_functionals, shell_maxima, slip_trace_residual, Region,
    RegularityValues,
};
pub use grid::{Admissibility, BoundaryClass, Grid, GridSpec};
pub use ops::{discrete_curl, divergence, gradient_field, partial, sym_gradient_field};
pub use project::{leray_project, leray_project_with, LerayReport};
pub use reflect::{mirror, reflect, reflect_pressure, restrict, restrict_pressure};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field lives on a different grid")]
    GridMismatch,
    #[error("operation requires a half-space grid")]
    NotHalfSpace,
    #[error("strain field vanishes; ratio undefined")]
    ZeroStrain,
    #[error("shift {lambda} along axis {axis} leaves the grid from the region")]
    ShiftTooLarge { lambda: f64, axis: usize },
    #[error("shift {0} is not a nonzero multiple of the grid spacing")]
    ShiftNotOnGrid(f64),
    #[error("projection did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    Format(String),
}
