use serde::{Deserialize, Serialize};

use super::{DomainError, Grid};
use crate::tensor::SymTensor;

/// Nodal velocity, stored component-major: dof `c·N + node`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    data: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        VelocityField { grid: grid.clone(), data: vec![0.0; grid.num_dofs()] }
    }

    pub fn from_data(grid: &Grid, data: Vec<f64>) -> Result<Self, DomainError> {
        if data.len() != grid.num_dofs() {
            return Err(DomainError::GridMismatch);
        }
        Ok(VelocityField { grid: grid.clone(), data })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        let mut u = Self::zeros(grid);
        let nn = grid.num_nodes();
        for node in 0..nn {
            let v = f(&grid.coords(node));
            for (c, val) in v.iter().enumerate().take(grid.dim()) {
                u.data[c * nn + node] = *val;
            }
        }
        u
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, node: usize) -> f64 {
        self.data[c * self.grid.num_nodes() + node]
    }
    #[inline]
    pub fn set(&mut self, c: usize, node: usize, v: f64) {
        let nn = self.grid.num_nodes();
        self.data[c * nn + node] = v;
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let nn = self.grid.num_nodes();
        &self.data[c * nn..(c + 1) * nn]
    }

    pub fn at(&self, node: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (c, x) in v.iter_mut().enumerate().take(self.grid.dim()) {
            *x = self.get(c, node);
        }
        v
    }

    /// Lumped-mass (trapezoid) inner product.
    pub fn inner(&self, other: &VelocityField) -> f64 {
        let nn = self.grid.num_nodes();
        let w = self.grid.weights();
        self.data.iter().zip(&other.data).enumerate().map(|(i, (a, b))| w[i % nn] * a * b).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean magnitude per node.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.num_nodes()).map(|n| self.at(n).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &VelocityField) {
        for (y, v) in self.data.iter_mut().zip(&x.data) {
            *y += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> VelocityField {
        VelocityField { grid: self.grid.clone(), data: self.data.iter().map(|v| a * v).collect() }
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Nodal scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        ScalarField { grid: grid.clone(), values: (0..grid.num_nodes()).map(|n| f(&grid.coords(n))).collect() }
    }
}

/// One value per grid cell (cell-centred).
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl CellField {
    /// Root-mean-square norm over the domain.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureLocation {
    Nodes,
    Cells,
}

/// Pressure with zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub grid: Grid,
    pub location: PressureLocation,
    pub values: Vec<f64>,
}

impl PressureField {
    pub fn cells(grid: &Grid, values: Vec<f64>) -> Self {
        PressureField { grid: grid.clone(), location: PressureLocation::Cells, values }
    }

    pub fn nodes(grid: &Grid, values: Vec<f64>) -> Self {
        PressureField { grid: grid.clone(), location: PressureLocation::Nodes, values }
    }

    /// Quadrature weights matching the storage location.
    pub fn weights(&self) -> Vec<f64> {
        match self.location {
            PressureLocation::Nodes => self.grid.weights(),
            PressureLocation::Cells => vec![self.grid.cell_volume(); self.values.len()],
        }
    }

    pub fn mean(&self) -> f64 {
        let w = self.weights();
        let vol: f64 = w.iter().sum();
        w.iter().zip(&self.values).map(|(w, v)| w * v).sum::<f64>() / vol
    }

    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
    }
}

/// Symmetric tensor per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub grid: Grid,
    pub values: Vec<SymTensor>,
}

impl SymTensorField {
    pub fn norms(&self) -> Vec<f64> {
        self.values.iter().map(|t| t.norm()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_norm_of_linear_field() {
        let g = Grid::new(3, 1.0, 8, true).unwrap();
        let u = VelocityField::from_fn(&g, |x| [x[2], 0.0, 0.0]);
        // ∫ x3² over [−1,1]²×[0,1] = 4/3; the trapezoid rule overshoots by h²/6·4
        let exact = 4.0 / 3.0;
        assert!((u.norm_l2().powi(2) - exact).abs() < 4.0 * g.h().powi(2) / 6.0 + 1e-12);
    }

    #[test]
    fn pressure_gauge() {
        let g = Grid::new(2, 1.0, 4, true).unwrap();
        let mut p = PressureField::cells(&g, (0..g.num_cells()).map(|i| i as f64).collect());
        p.remove_mean();
        assert!(p.mean().abs() < 1e-12);
    }
}
