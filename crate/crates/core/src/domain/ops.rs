use super::{CellField, DomainError, Grid, SymTensorField, VelocityField};
use crate::fem::Q1;
use crate::tensor::SymTensor;

/// Nodal derivative along `axis`: centred in the interior, one-sided
/// second order on the two end layers.
pub fn partial(grid: &Grid, f: &[f64], axis: usize) -> Vec<f64> {
    let s = grid.stride(axis);
    let n = grid.shape()[axis];
    let inv = 0.5 / grid.h();
    (0..grid.num_nodes())
        .map(|node| {
            let i = grid.multi_index(node)[axis];
            if i == 0 {
                (-3.0 * f[node] + 4.0 * f[node + s] - f[node + 2 * s]) * inv
            } else if i + 1 == n {
                (3.0 * f[node] - 4.0 * f[node - s] + f[node - 2 * s]) * inv
            } else {
                (f[node + s] - f[node - s]) * inv
            }
        })
        .collect()
}

/// `g[node][i][j] = ∂_j u_i`.
pub fn gradient_field(u: &VelocityField) -> Vec<[[f64; 3]; 3]> {
    let grid = u.grid();
    let d = grid.dim();
    let mut out = vec![[[0.0; 3]; 3]; grid.num_nodes()];
    for i in 0..d {
        for j in 0..d {
            for (o, v) in out.iter_mut().zip(partial(grid, u.component(i), j)) {
                o[i][j] = v;
            }
        }
    }
    out
}

/// `D(u)` at every node.
pub fn sym_gradient_field(u: &VelocityField) -> SymTensorField {
    let d = u.grid().dim();
    SymTensorField {
        grid: u.grid().clone(),
        values: gradient_field(u).iter().map(|g| SymTensor::symmetrize(d, g)).collect(),
    }
}

/// Cell-average divergence (the constraint used by the projection and the
/// Stokes basis).
pub fn divergence(u: &VelocityField) -> CellField {
    let grid = u.grid();
    let mut values = vec![0.0; grid.num_cells()];
    Q1::new(grid).cell_div(grid, u.data(), &mut values);
    CellField { grid: grid.clone(), values }
}

/// Velocity from a potential by centred differences: in 2D `(∂₂ψ, −∂₁ψ)`
/// from one scalar, in 3D `∇×A` from three components. The centred
/// divergence of the result vanishes identically.
pub fn discrete_curl(grid: &Grid, potential: &[Vec<f64>]) -> Result<VelocityField, DomainError> {
    let nn = grid.num_nodes();
    let want = if grid.dim() == 2 { 1 } else { 3 };
    if potential.len() != want || potential.iter().any(|p| p.len() != nn) {
        return Err(DomainError::GridMismatch);
    }
    let mut data = vec![0.0; grid.num_dofs()];
    if grid.dim() == 2 {
        let (d1, d2) = (partial(grid, &potential[0], 0), partial(grid, &potential[0], 1));
        data[..nn].copy_from_slice(&d2);
        data[nn..].iter_mut().zip(&d1).for_each(|(o, v)| *o = -v);
    } else {
        let d = |c: usize, a: usize| partial(grid, &potential[c], a);
        let comps = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)];
        for (i, (c1, a1, c2, a2)) in comps.into_iter().enumerate() {
            let (p, m) = (d(c1, a1), d(c2, a2));
            for n in 0..nn {
                data[i * nn + n] = p[n] - m[n];
            }
        }
    }
    VelocityField::from_data(grid, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear_fields() {
        let g = Grid::new(3, 1.0, 4, true).unwrap();
        let c = VelocityField::from_fn(&g, |_| [1.0, -2.0, 3.0]);
        assert!(sym_gradient_field(&c).values.iter().all(|t| t.norm() < 1e-13));
        let l = VelocityField::from_fn(&g, |x| [x[2], 0.0, 0.0]);
        for t in sym_gradient_field(&l).values {
            assert!((t.get(0, 2) - 0.5).abs() < 1e-13);
            assert!(t.get(0, 0).abs() < 1e-13);
        }
    }

    fn sine_error(k: usize) -> f64 {
        let g = Grid::new(3, 1.0, k, true).unwrap();
        let u = VelocityField::from_fn(&g, |x| [x[2].sin(), 0.0, 0.0]);
        sym_gradient_field(&u)
            .values
            .iter()
            .enumerate()
            .map(|(n, t)| (t.get(0, 2) - 0.5 * g.coords(n)[2].cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        let e: Vec<f64> = [4, 8, 16].iter().map(|&k| sine_error(k)).collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{e:?}");
        }
    }

    #[test]
    fn curl_is_centred_divergence_free() {
        let g = Grid::new(3, 1.0, 5, true).unwrap();
        let pot: Vec<Vec<f64>> =
            (0..3).map(|c| (0..g.num_nodes()).map(|n| ((n * (c + 3)) as f64 * 0.37).sin()).collect()).collect();
        let u = discrete_curl(&g, &pot).unwrap();
        let div: Vec<f64> = (0..3)
            .map(|a| partial(&g, u.component(a), a))
            .fold(vec![0.0; g.num_nodes()], |acc, d| acc.iter().zip(&d).map(|(x, y)| x + y).collect());
        for n in 0..g.num_nodes() {
            let idx = g.multi_index(n);
            // only nodes two layers inside use purely centred stencils twice
            if (0..3).all(|a| idx[a] >= 2 && idx[a] + 3 <= g.shape()[a]) {
                assert!(div[n].abs() < 1e-10);
            }
        }
    }
}
