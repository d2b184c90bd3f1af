//! Multilinear (Q1) element tables on the uniform grid: tensor Gauss
//! quadrature with two points per axis, strain evaluation and its adjoint,
//! and the cell-average divergence.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::domain::Grid;
use crate::tensor::{nsym, packed_pairs};

#[derive(Debug, Clone)]
pub struct Q1 {
    dim: usize,
    nq: usize,
    nc: usize,
    weight: f64,
    refpts: Vec<[f64; 3]>,
    shape: Vec<f64>,
    dshape: Vec<[f64; 3]>,
    center_dshape: Vec<[f64; 3]>,
    pairs: Vec<(usize, usize)>,
}

fn factor(bit: bool, xi: f64) -> (f64, f64) {
    if bit {
        (xi, 1.0)
    } else {
        (1.0 - xi, -1.0)
    }
}

fn tables(dim: usize, h: f64, pts: &[[f64; 3]]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let nc = 1 << dim;
    let mut n = Vec::with_capacity(pts.len() * nc);
    let mut dn = Vec::with_capacity(pts.len() * nc);
    for xi in pts {
        for c in 0..nc {
            let mut val = 1.0;
            let mut d = [1.0; 3];
            for a in 0..dim {
                let (f, df) = factor(c >> a & 1 == 1, xi[a]);
                val *= f;
                for (b, db) in d.iter_mut().enumerate().take(dim) {
                    *db *= if a == b { df / h } else { f };
                }
            }
            for db in d.iter_mut().skip(dim) {
                *db = 0.0;
            }
            n.push(val);
            dn.push(d);
        }
    }
    (n, dn)
}

impl Q1 {
    pub fn new(grid: &Grid) -> Self {
        let dim = grid.dim();
        let nq = 1 << dim;
        let g = [0.5 * (1.0 - 1.0 / 3f64.sqrt()), 0.5 * (1.0 + 1.0 / 3f64.sqrt())];
        let refpts: Vec<[f64; 3]> = (0..nq)
            .map(|q| {
                let mut x = [0.0; 3];
                for (a, xa) in x.iter_mut().enumerate().take(dim) {
                    *xa = g[q >> a & 1];
                }
                x
            })
            .collect();
        let (shape, dshape) = tables(dim, grid.h(), &refpts);
        let (_, center_dshape) = tables(dim, grid.h(), &[[0.5; 3]]);
        Q1 {
            dim,
            nq,
            nc: 1 << dim,
            weight: grid.cell_volume() / nq as f64,
            refpts,
            shape,
            dshape,
            center_dshape,
            pairs: packed_pairs(dim).to_vec(),
        }
    }

    pub fn points_per_cell(&self) -> usize {
        self.nq
    }

    /// Quadrature weight shared by every point.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn num_points(&self, grid: &Grid) -> usize {
        grid.num_cells() * self.nq
    }

    /// Physical coordinates of all quadrature points, cell-major.
    pub fn points(&self, grid: &Grid) -> Vec<[f64; 3]> {
        let h = grid.h();
        let mut out = Vec::with_capacity(self.num_points(grid));
        for cell in 0..grid.num_cells() {
            let x0 = grid.coords(grid.cell_corners(cell)[0]);
            for r in &self.refpts {
                let mut x = [0.0; 3];
                for a in 0..self.dim {
                    x[a] = x0[a] + h * r[a];
                }
                out.push(x);
            }
        }
        out
    }

    #[inline]
    fn grad_at(&self, nn: usize, corners: &[usize; 8], q: usize, u: &[f64]) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for c in 0..self.nc {
            let d = self.dshape[q * self.nc + c];
            let node = corners[c];
            for (i, gi) in g.iter_mut().enumerate().take(self.dim) {
                let v = u[i * nn + node];
                for j in 0..self.dim {
                    gi[j] += v * d[j];
                }
            }
        }
        g
    }

    /// Velocity at every quadrature point.
    pub fn values(&self, grid: &Grid, u: &[f64]) -> Vec<[f64; 3]> {
        let nn = grid.num_nodes();
        let mut out = Vec::with_capacity(self.num_points(grid));
        for cell in 0..grid.num_cells() {
            let corners = grid.cell_corners(cell);
            for q in 0..self.nq {
                let mut v = [0.0; 3];
                for c in 0..self.nc {
                    let s = self.shape[q * self.nc + c];
                    for (i, vi) in v.iter_mut().enumerate().take(self.dim) {
                        *vi += s * u[i * nn + corners[c]];
                    }
                }
                out.push(v);
            }
        }
        out
    }

    /// Velocity gradient `g[i][j] = ∂_j u_i` at every quadrature point.
    pub fn gradients(&self, grid: &Grid, u: &[f64]) -> Vec<[[f64; 3]; 3]> {
        let nn = grid.num_nodes();
        let mut out = Vec::with_capacity(self.num_points(grid));
        for cell in 0..grid.num_cells() {
            let corners = grid.cell_corners(cell);
            for q in 0..self.nq {
                out.push(self.grad_at(nn, &corners, q, u));
            }
        }
        out
    }

    /// Symmetric gradient in Kelvin coordinates, `nsym` values per point.
    pub fn sym_grad(&self, grid: &Grid, u: &[f64], out: &mut [f64]) {
        let nn = grid.num_nodes();
        let ns = nsym(self.dim);
        debug_assert_eq!(out.len(), self.num_points(grid) * ns);
        let mut k = 0;
        for cell in 0..grid.num_cells() {
            let corners = grid.cell_corners(cell);
            for q in 0..self.nq {
                let g = self.grad_at(nn, &corners, q, u);
                for &(i, j) in &self.pairs {
                    out[k] = if i == j { g[i][i] } else { (g[i][j] + g[j][i]) * FRAC_1_SQRT_2 };
                    k += 1;
                }
            }
        }
    }

    /// Adjoint of [`Q1::sym_grad`]; accumulates into `out` (no weights applied).
    pub fn sym_grad_t(&self, grid: &Grid, s: &[f64], out: &mut [f64]) {
        let nn = grid.num_nodes();
        let ns = nsym(self.dim);
        let mut k = 0;
        for cell in 0..grid.num_cells() {
            let corners = grid.cell_corners(cell);
            for q in 0..self.nq {
                let sq = &s[k..k + ns];
                k += ns;
                for c in 0..self.nc {
                    let d = self.dshape[q * self.nc + c];
                    let node = corners[c];
                    for (&(i, j), &v) in self.pairs.iter().zip(sq) {
                        if i == j {
                            out[i * nn + node] += v * d[i];
                        } else {
                            let w = v * FRAC_1_SQRT_2;
                            out[i * nn + node] += w * d[j];
                            out[j * nn + node] += w * d[i];
                        }
                    }
                }
            }
        }
    }

    /// Divergence at each cell centre (equal to the cell average).
    pub fn cell_div(&self, grid: &Grid, u: &[f64], out: &mut [f64]) {
        let nn = grid.num_nodes();
        for (cell, o) in out.iter_mut().enumerate().take(grid.num_cells()) {
            let corners = grid.cell_corners(cell);
            let mut s = 0.0;
            for c in 0..self.nc {
                let d = self.center_dshape[c];
                for (i, di) in d.iter().enumerate().take(self.dim) {
                    s += u[i * nn + corners[c]] * di;
                }
            }
            *o = s;
        }
    }

    /// Adjoint of [`Q1::cell_div`]; accumulates into `out`.
    pub fn cell_div_t(&self, grid: &Grid, q: &[f64], out: &mut [f64]) {
        let nn = grid.num_nodes();
        for (cell, &v) in q.iter().enumerate() {
            let corners = grid.cell_corners(cell);
            for c in 0..self.nc {
                let d = self.center_dshape[c];
                for (i, di) in d.iter().enumerate().take(self.dim) {
                    out[i * nn + corners[c]] += v * di;
                }
            }
        }
    }

    /// `(D u, D v)` with the Gauss rule.
    pub fn strain_inner(&self, grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
        let n = self.num_points(grid) * nsym(self.dim);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        self.sym_grad(grid, u, &mut a);
        self.sym_grad(grid, v, &mut b);
        self.weight * a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VelocityField;

    #[test]
    fn partition_of_unity() {
        let g = Grid::new(3, 1.0, 2, true).unwrap();
        let q = Q1::new(&g);
        for p in 0..q.nq {
            let s: f64 = (0..q.nc).map(|c| q.shape[p * q.nc + c]).sum();
            assert!((s - 1.0).abs() < 1e-15);
            for a in 0..3 {
                let d: f64 = (0..q.nc).map(|c| q.dshape[p * q.nc + c][a]).sum();
                assert!(d.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_fields_exact() {
        let g = Grid::new(2, 1.0, 3, true).unwrap();
        let q = Q1::new(&g);
        let u = VelocityField::from_fn(&g, |x| [2.0 * x[1], 3.0 * x[0] - x[1], 0.0]);
        for gr in q.gradients(&g, u.data()) {
            assert!((gr[0][1] - 2.0).abs() < 1e-12 && (gr[1][0] - 3.0).abs() < 1e-12);
        }
        let mut div = vec![0.0; g.num_cells()];
        q.cell_div(&g, u.data(), &mut div);
        assert!(div.iter().all(|d| (d + 1.0).abs() < 1e-12));
        // |D|² = 1 + 2·(5/2)² over area 2
        let e = q.strain_inner(&g, u.data(), u.data());
        assert!((e - 2.0 * (1.0 + 12.5)).abs() < 1e-10);
    }

    #[test]
    fn adjoints_match() {
        let g = Grid::new(3, 1.0, 2, true).unwrap();
        let q = Q1::new(&g);
        let u: Vec<f64> = (0..g.num_dofs()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let ns = nsym(3);
        let s: Vec<f64> = (0..q.num_points(&g) * ns).map(|i| ((i * 17 % 13) as f64).cos()).collect();
        let mut du = vec![0.0; s.len()];
        q.sym_grad(&g, &u, &mut du);
        let mut dts = vec![0.0; u.len()];
        q.sym_grad_t(&g, &s, &mut dts);
        let l: f64 = du.iter().zip(&s).map(|(a, b)| a * b).sum();
        let r: f64 = u.iter().zip(&dts).map(|(a, b)| a * b).sum();
        assert!((l - r).abs() < 1e-10 * l.abs().max(1.0));

        let c: Vec<f64> = (0..g.num_cells()).map(|i| i as f64 - 7.0).collect();
        let mut bu = vec![0.0; c.len()];
        q.cell_div(&g, &u, &mut bu);
        let mut btc = vec![0.0; u.len()];
        q.cell_div_t(&g, &c, &mut btc);
        let l: f64 = bu.iter().zip(&c).map(|(a, b)| a * b).sum();
        let r: f64 = u.iter().zip(&btc).map(|(a, b)| a * b).sum();
        assert!((l - r).abs() < 1e-10 * l.abs().max(1.0));
    }
}
