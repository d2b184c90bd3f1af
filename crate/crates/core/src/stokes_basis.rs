//! Divergence-free eigenbasis of the slip-boundary Stokes operator.
//!
//! The weak operator is `(D u, D v)` on multilinear elements, the constraint
//! is the cell-average divergence, and the mass pairing is the nodal
//! trapezoid rule. Eigenpairs are normalized so that `(a_i, a_j) = δ_ij` and
//! `(D a_i, D a_j) = λ_i δ_ij`.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::domain::{mirror, Admissibility, DomainError, Grid, PressureField, VelocityField};
use crate::fem::Q1;
use crate::tensor::nsym;

#[derive(Debug, Error)]
pub enum StokesError {
    #[error("no divergence-free fields satisfy the boundary conditions on this grid")]
    EmptySubspace,
    #[error("requested {requested} modes but the subspace has dimension {available}")]
    TooManyModes { requested: usize, available: usize },
    #[error("dense linear algebra failed: {0}")]
    Solver(String),
    #[error("eigenvalue {index} is not positive ({value:e})")]
    NonPositive { index: usize, value: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Weak strain operator `u ↦ (D u, D ·)` with constrained rows zeroed.
#[derive(Debug, Clone)]
pub struct StokesOperator {
    grid: Grid,
    adm: Admissibility,
    q1: Q1,
    fixed: Vec<bool>,
}

/// The slip/no-slip Stokes operator on `grid`.
pub fn assemble_stokes(grid: &Grid) -> StokesOperator {
    StokesOperator::new(grid, Admissibility::SlipNoSlip)
}

impl StokesOperator {
    pub fn new(grid: &Grid, adm: Admissibility) -> Self {
        StokesOperator { grid: grid.clone(), adm, q1: Q1::new(grid), fixed: grid.constrained_dofs(adm) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn admissibility(&self) -> Admissibility {
        self.adm
    }

    pub fn constrained(&self) -> &[bool] {
        &self.fixed
    }

    /// `(D u, D φ_i)` for every basis function, without boundary rows removed.
    pub fn apply_unconstrained(&self, u: &[f64]) -> Vec<f64> {
        let ns = nsym(self.grid.dim());
        let mut s = vec![0.0; self.q1.num_points(&self.grid) * ns];
        self.q1.sym_grad(&self.grid, u, &mut s);
        let w = self.q1.weight();
        s.iter_mut().for_each(|v| *v *= w);
        let mut out = vec![0.0; u.len()];
        self.q1.sym_grad_t(&self.grid, &s, &mut out);
        out
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply_unconstrained(u);
        out.iter_mut().zip(&self.fixed).for_each(|(v, &f)| {
            if f {
                *v = 0.0
            }
        });
        out
    }

    /// `(D u, D v)`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        self.q1.strain_inner(&self.grid, u, v)
    }
}

/// M-orthonormal basis of the admissible divergence-free fields, with the
/// singular system of the scaled constraint kept for pressure recovery.
#[derive(Debug, Clone)]
pub struct DivFreeSubspace {
    grid: Grid,
    adm: Admissibility,
    free: Vec<usize>,
    inv_sqrt_mass: Vec<f64>,
    basis: Mat<f64>,
    rank: usize,
    range_u: Mat<f64>,
    range_s: Vec<f64>,
    range_v: Mat<f64>,
}

/// Relative singular-value cut-off separating the constraint rank from
/// round-off.
const RANK_TOL: f64 = 1e-9;

pub fn divfree_subspace(grid: &Grid, adm: Admissibility) -> Result<DivFreeSubspace, StokesError> {
    let q1 = Q1::new(grid);
    let free = grid.free_dofs(adm);
    let nn = grid.num_nodes();
    let w = grid.weights();
    let inv_sqrt_mass: Vec<f64> = free.iter().map(|&i| 1.0 / w[i % nn].sqrt()).collect();
    let nc = grid.num_cells();
    let nf = free.len();

    let mut c = Mat::<f64>::zeros(nc, nf);
    let mut e = vec![0.0; grid.num_dofs()];
    let mut col = vec![0.0; nc];
    for (j, &dof) in free.iter().enumerate() {
        e[dof] = inv_sqrt_mass[j];
        q1.cell_div(grid, &e, &mut col);
        e[dof] = 0.0;
        for (i, v) in col.iter().enumerate() {
            if *v != 0.0 {
                c[(i, j)] = *v;
            }
        }
    }
    let svd = c.svd().map_err(|e| StokesError::Solver(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let rank = (0..s.nrows()).filter(|&i| s[i] > RANK_TOL * smax).count();
    if rank >= nf {
        return Err(StokesError::EmptySubspace);
    }
    let v = svd.V();
    let basis = Mat::<f64>::from_fn(nf, nf - rank, |i, j| inv_sqrt_mass[i] * v[(i, rank + j)]);
    Ok(DivFreeSubspace {
        grid: grid.clone(),
        adm,
        free,
        inv_sqrt_mass,
        basis,
        rank,
        range_u: svd.U().subcols(0, rank).to_owned(),
        range_s: (0..rank).map(|i| s[i]).collect(),
        range_v: v.subcols(0, rank).to_owned(),
    })
}

/// Rank of the constraint operator stacked from the divergence rows and one
/// identity row per constrained dof, by an independent SVD.
pub fn constraint_rank(grid: &Grid, adm: Admissibility) -> usize {
    let q1 = Q1::new(grid);
    let fixed = grid.constrained_dofs(adm);
    let nfix = fixed.iter().filter(|&&f| f).count();
    let nd = grid.num_dofs();
    let nc = grid.num_cells();
    let mut m = DMatrix::<f64>::zeros(nc + nfix, nd);
    let mut e = vec![0.0; nd];
    let mut col = vec![0.0; nc];
    for j in 0..nd {
        e[j] = 1.0;
        q1.cell_div(grid, &e, &mut col);
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v * grid.h();
        }
    }
    for (r, j) in fixed.iter().enumerate().filter(|(_, &f)| f).map(|(j, _)| j).enumerate() {
        m[(nc + r, j)] = 1.0;
    }
    let s = m.svd(false, false).singular_values;
    let smax = s.max();
    s.iter().filter(|&&v| v > RANK_TOL * smax).count()
}

impl DivFreeSubspace {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn admissibility(&self) -> Admissibility {
        self.adm
    }
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
    pub fn num_free(&self) -> usize {
        self.free.len()
    }
    /// Rank of the divergence constraint on the free dofs.
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Full dof vector of basis column `j`.
    pub fn column(&self, j: usize) -> VelocityField {
        self.embed(|i| self.basis[(i, j)])
    }

    fn embed(&self, f: impl Fn(usize) -> f64) -> VelocityField {
        let mut data = vec![0.0; self.grid.num_dofs()];
        for (i, &dof) in self.free.iter().enumerate() {
            data[dof] = f(i);
        }
        VelocityField::from_data(&self.grid, data).expect("sized to grid")
    }

    /// Least-squares pressures `p_k` with `Bᵀ p_k = r_k` on the free dofs for
    /// each residual column, cell values scaled to the L² pairing and gauged
    /// to zero mean. Also returns the largest relative misfit.
    fn pressures_from_residuals(&self, r: &Mat<f64>) -> (Vec<PressureField>, f64) {
        let nf = self.free.len();
        let y = Mat::<f64>::from_fn(nf, r.ncols(), |i, k| r[(i, k)] * self.inv_sqrt_mass[i]);
        let proj = self.range_v.transpose() * &y;
        let coef = Mat::<f64>::from_fn(self.rank, r.ncols(), |i, k| proj[(i, k)] / self.range_s[i]);
        let cells = &self.range_u * &coef;
        let fitted = &self.range_v * &proj;
        let vol = self.grid.cell_volume();
        let mut misfit = 0.0f64;
        let pressures = (0..r.ncols())
            .map(|k| {
                let num: f64 = (0..nf).map(|i| (fitted[(i, k)] - y[(i, k)]).powi(2)).sum::<f64>().sqrt();
                let den: f64 = (0..nf).map(|i| y[(i, k)].powi(2)).sum::<f64>().sqrt();
                if den > 0.0 {
                    misfit = misfit.max(num / den);
                }
                let mut p = PressureField::cells(&self.grid, (0..cells.nrows()).map(|c| cells[(c, k)] / vol).collect());
                p.remove_mean();
                p
            })
            .collect();
        (pressures, misfit)
    }
}

/// One eigenpair with its pressure.
#[derive(Debug, Clone)]
pub struct StokesMode {
    pub lambda: f64,
    pub velocity: VelocityField,
    pub pressure: PressureField,
}

#[derive(Debug, Clone)]
pub struct StokesBasis {
    grid: Grid,
    adm: Admissibility,
    modes: Vec<StokesMode>,
    subspace_dim: usize,
    pressure_misfit: f64,
    parity: Option<Vec<f64>>,
}

/// The `m` lowest slip/no-slip modes on `grid`.
pub fn solve_eigen(grid: &Grid, m: usize) -> Result<StokesBasis, StokesError> {
    let sub = divfree_subspace(grid, Admissibility::SlipNoSlip)?;
    StokesBasis::from_subspace(&sub, m, false)
}

impl StokesBasis {
    /// Solves the reduced eigenproblem and keeps the `m` lowest modes; with
    /// `extend_to_gap`, `m` grows until it does not split a degenerate cluster.
    pub fn from_subspace(sub: &DivFreeSubspace, m: usize, extend_to_gap: bool) -> Result<Self, StokesError> {
        let d = sub.dim();
        if m == 0 || m > d {
            return Err(StokesError::TooManyModes { requested: m, available: d });
        }
        let grid = sub.grid.clone();
        let op = StokesOperator::new(&grid, sub.adm);
        let nf = sub.free.len();
        let mut kz = Mat::<f64>::zeros(nf, d);
        for j in 0..d {
            let col = sub.column(j);
            let k = op.apply_unconstrained(col.data());
            for (i, &dof) in sub.free.iter().enumerate() {
                kz[(i, j)] = k[dof];
            }
        }
        let kred = sub.basis.transpose() * &kz;
        let sym = Mat::<f64>::from_fn(d, d, |i, j| 0.5 * (kred[(i, j)] + kred[(j, i)]));
        let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|e| StokesError::Solver(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));

        let mut m = m;
        if extend_to_gap {
            while m < d && s[order[m]] - s[order[m - 1]] <= CLUSTER_TOL * s[order[m]].abs() {
                m += 1;
            }
        }

        let w = grid.weights();
        let nn = grid.num_nodes();
        let picked = Mat::<f64>::from_fn(d, m, |j, c| u[(j, order[c])]);
        let af = &sub.basis * &picked;
        let mut velocities = Vec::with_capacity(m);
        let mut resid = Mat::<f64>::zeros(nf, m);
        for c in 0..m {
            let lambda = s[order[c]];
            if !(lambda > 0.0) {
                return Err(StokesError::NonPositive { index: c, value: lambda });
            }
            let velocity = sub.embed(|i| af[(i, c)]);
            let ka = op.apply_unconstrained(velocity.data());
            for (i, &dof) in sub.free.iter().enumerate() {
                resid[(i, c)] = ka[dof] - lambda * w[dof % nn] * af[(i, c)];
            }
            velocities.push(velocity);
        }
        let (pressures, misfit) = sub.pressures_from_residuals(&resid);
        let modes = velocities
            .into_iter()
            .zip(pressures)
            .enumerate()
            .map(|(c, (velocity, pressure))| StokesMode { lambda: s[order[c]], velocity, pressure })
            .collect();
        Ok(StokesBasis { grid, adm: sub.adm, modes, subspace_dim: d, pressure_misfit: misfit, parity: None })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn admissibility(&self) -> Admissibility {
        self.adm
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }
    pub fn modes(&self) -> &[StokesMode] {
        &self.modes
    }
    pub fn mode(&self, i: usize) -> &StokesMode {
        &self.modes[i]
    }
    /// `Σ c_k a_k`.
    pub fn reconstruct(&self, c: &DVector<f64>) -> VelocityField {
        let mut u = VelocityField::zeros(&self.grid);
        for (ck, mode) in c.iter().zip(&self.modes) {
            u.axpy(*ck, &mode.velocity);
        }
        u
    }
    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }
    /// Largest relative misfit of the pressure least-squares fits.
    pub fn pressure_misfit(&self) -> f64 {
        self.pressure_misfit
    }
    /// Mirror parity `(a_i, P a_i)` of each mode after [`StokesBasis::symmetry_adapt`].
    pub fn parity(&self) -> Option<&[f64]> {
        self.parity.as_deref()
    }

    /// Keeps the first `m` modes.
    pub fn truncate(&mut self, m: usize) {
        self.modes.truncate(m);
        if let Some(p) = self.parity.as_mut() {
            p.truncate(m);
        }
    }

    /// Keeps the modes whose index satisfies `keep`, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let flags: Vec<bool> = (0..self.modes.len()).map(&mut keep).collect();
        let mut it = flags.iter();
        self.modes.retain(|_| *it.next().expect("one flag per mode"));
        if let Some(p) = self.parity.as_mut() {
            let mut it = flags.iter();
            p.retain(|_| *it.next().expect("one flag per mode"));
        }
    }

    /// Matrix of `(a_i, a_j)` in the nodal rule.
    pub fn mass_gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.modes[i].velocity.inner(&self.modes[j].velocity))
    }

    /// Matrix of `(D a_i, D a_j)`.
    pub fn strain_gram(&self) -> DMatrix<f64> {
        let op = StokesOperator::new(&self.grid, self.adm);
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| op.energy(self.modes[i].velocity.data(), self.modes[j].velocity.data()))
    }

    /// On a full-box grid, rotates each degenerate cluster so that every mode
    /// is even or odd under the mirror across `x_n = 0`.
    pub fn symmetry_adapt(&mut self) -> Result<(), StokesError> {
        let n = self.len();
        let mirrored: Vec<VelocityField> = self.modes.iter().map(|m| mirror(&m.velocity)).collect::<Result<_, _>>()?;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && self.modes[end].lambda - self.modes[end - 1].lambda <= CLUSTER_TOL * self.modes[end].lambda
            {
                end += 1;
            }
            if end - start > 1 {
                let k = end - start;
                let pm = DMatrix::from_fn(k, k, |i, j| {
                    0.5 * (self.modes[start + i].velocity.inner(&mirrored[start + j])
                        + self.modes[start + j].velocity.inner(&mirrored[start + i]))
                });
                let eig = pm.symmetric_eigen();
                let old: Vec<StokesMode> = self.modes[start..end].to_vec();
                for c in 0..k {
                    let mut vel = VelocityField::zeros(&self.grid);
                    let mut pres = old[0].pressure.values.iter().map(|_| 0.0).collect::<Vec<_>>();
                    for (i, o) in old.iter().enumerate() {
                        let a = eig.eigenvectors[(i, c)];
                        vel.axpy(a, &o.velocity);
                        pres.iter_mut().zip(&o.pressure.values).for_each(|(p, v)| *p += a * v);
                    }
                    let lambda = old.iter().map(|o| o.lambda).sum::<f64>() / k as f64;
                    let mode = &mut self.modes[start + c];
                    mode.velocity = vel;
                    mode.pressure.values = pres;
                    mode.lambda = lambda;
                }
            }
            start = end;
        }
        let parity = self
            .modes
            .iter()
            .map(|m| Ok(m.velocity.inner(&mirror(&m.velocity)?)))
            .collect::<Result<Vec<_>, DomainError>>()?;
        self.parity = Some(parity);
        Ok(())
    }
}

/// Relative eigenvalue spacing below which modes count as degenerate.
pub const CLUSTER_TOL: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::divergence;

    fn admissible_random(grid: &Grid, seed: u64) -> Vec<f64> {
        let fixed = grid.constrained_dofs(Admissibility::SlipNoSlip);
        (0..grid.num_dofs())
            .map(|i| if fixed[i] { 0.0 } else { ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0 })
            .collect()
    }

    #[test]
    fn operator_basics() {
        let g = Grid::new(2, 1.0, 6, true).unwrap();
        let op = assemble_stokes(&g);
        assert!(op.apply(&vec![0.0; g.num_dofs()]).iter().all(|v| *v == 0.0));
        let lin = VelocityField::from_fn(&g, |x| [2.0 * x[0] - x[1], 0.5 * x[0] + 3.0 * x[1], 0.0]);
        let y = op.apply_unconstrained(lin.data());
        let nn = g.num_nodes();
        for node in 0..nn {
            if g.boundary_class(node) == crate::domain::BoundaryClass::Interior {
                assert!(y[node].abs() < 1e-12 && y[nn + node].abs() < 1e-12);
            }
        }
        for s in 0..50 {
            let u = admissible_random(&g, s);
            let v = admissible_random(&g, s + 1000);
            let au: f64 = op.apply(&u).iter().zip(&v).map(|(a, b)| a * b).sum();
            let av: f64 = op.apply(&v).iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!((au - av).abs() <= 1e-10 * au.abs().max(av.abs()));
        }
    }

    #[test]
    fn subspace_dimension_matches_rank_oracle() {
        let g = Grid::new(2, 1.0, 4, true).unwrap();
        let sub = divfree_subspace(&g, Admissibility::SlipNoSlip).unwrap();
        let rank = constraint_rank(&g, Admissibility::SlipNoSlip);
        assert_eq!(sub.dim(), g.num_dofs() - rank);
        let w = g.weights();
        let nn = g.num_nodes();
        for i in 0..sub.dim() {
            let a = sub.column(i);
            assert!(divergence(&a).norm_l2() <= 1e-10 * a.norm_l2());
            for j in 0..sub.dim() {
                let b = sub.column(j);
                let ip: f64 = a.data().iter().zip(b.data()).enumerate().map(|(k, (x, y))| w[k % nn] * x * y).sum();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenpairs_are_normalized() {
        let g = Grid::new(2, 1.0, 6, true).unwrap();
        let b = solve_eigen(&g, 10).unwrap();
        let mg = b.mass_gram();
        let sg = b.strain_gram();
        for i in 0..b.len() {
            assert!(b.mode(i).lambda > 0.0);
            for j in 0..b.len() {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((mg[(i, j)] - d).abs() < 1e-8);
                assert!((sg[(i, j)] - d * b.mode(i).lambda).abs() < 1e-6 * b.mode(i).lambda);
            }
        }
        assert!(b.lambdas().windows(2).all(|w| w[0] <= w[1]));
        assert!(b.pressure_misfit() < 1e-8, "{}", b.pressure_misfit());
        for m in b.modes() {
            assert!(m.pressure.mean().abs() < 1e-10);
        }
    }

    #[test]
    fn smaller_domain_has_larger_eigenvalue() {
        let big = solve_eigen(&Grid::new(2, 1.0, 6, true).unwrap(), 1).unwrap();
        let small = solve_eigen(&Grid::new(2, 0.5, 6, true).unwrap(), 1).unwrap();
        assert!(small.mode(0).lambda > big.mode(0).lambda);
    }

    #[test]
    fn too_many_modes_rejected() {
        let g = Grid::new(2, 1.0, 2, true).unwrap();
        match divfree_subspace(&g, Admissibility::SlipNoSlip) {
            Ok(sub) => assert!(matches!(
                StokesBasis::from_subspace(&sub, sub.dim() + 1, false),
                Err(StokesError::TooManyModes { .. })
            )),
            Err(e) => assert!(matches!(e, StokesError::EmptySubspace)),
        }
    }

    #[test]
    fn full_box_modes_have_definite_parity() {
        let g = Grid::new(2, 1.0, 4, false).unwrap();
        let sub = divfree_subspace(&g, Admissibility::SlipNoSlip).unwrap();
        let mut b = StokesBasis::from_subspace(&sub, 12, true).unwrap();
        b.symmetry_adapt().unwrap();
        for p in b.parity().unwrap() {
            assert!((p.abs() - 1.0).abs() < 1e-8, "{p}");
        }
    }
}
