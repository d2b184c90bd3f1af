use serde::{Deserialize, Serialize};

use super::{Admissibility, DomainError, VelocityField};
use crate::fem::Q1;

/// Convergence record of the pressure-Poisson solve behind a projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LerayReport {
    pub iterations: usize,
    /// Final `h‖div v‖ / ‖u‖` in Euclidean norms.
    pub residual: f64,
}

const TARGET: f64 = 1e-13;
const FLOOR: f64 = 1e-15;
const ACCEPT: f64 = 1e-11;

/// Projection onto discretely divergence-free fields with zero normal
/// component on every face.
pub fn leray_project(u: &VelocityField) -> Result<VelocityField, DomainError> {
    leray_project_with(u, Admissibility::Impermeable).map(|(v, _)| v)
}

/// Lumped-mass orthogonal projection onto `{v : B v = 0, v = 0 on the
/// constrained dofs}`. The Poisson-type system `B M⁻¹ Bᵀ φ = B u` is solved
/// by conjugate gradients; it is singular but consistent.
pub fn leray_project_with(u: &VelocityField, adm: Admissibility) -> Result<(VelocityField, LerayReport), DomainError> {
    let grid = u.grid();
    let q1 = Q1::new(grid);
    let nn = grid.num_nodes();
    let fixed = grid.constrained_dofs(adm);
    let w = grid.weights();
    let minv: Vec<f64> = (0..grid.num_dofs()).map(|i| if fixed[i] { 0.0 } else { 1.0 / w[i % nn] }).collect();

    let mut uf: Vec<f64> = u.data().to_vec();
    uf.iter_mut().zip(&fixed).for_each(|(v, &f)| {
        if f {
            *v = 0.0
        }
    });

    let nc = grid.num_cells();
    let mut b = vec![0.0; nc];
    q1.cell_div(grid, &uf, &mut b);
    let bnorm = norm(&b);
    // natural size of a divergence built from this field
    let scale = norm(&uf) / grid.h();
    if bnorm <= FLOOR * scale {
        return Ok((
            VelocityField::from_data(grid, uf)?,
            LerayReport { iterations: 0, residual: bnorm / scale.max(f64::MIN_POSITIVE) },
        ));
    }

    let mut tmp = vec![0.0; grid.num_dofs()];
    let mut apply = |x: &[f64], y: &mut [f64]| {
        tmp.iter_mut().for_each(|v| *v = 0.0);
        q1.cell_div_t(grid, x, &mut tmp);
        tmp.iter_mut().zip(&minv).for_each(|(v, m)| *v *= m);
        q1.cell_div(grid, &tmp, y);
    };

    let mut phi = vec![0.0; nc];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; nc];
    let mut rr = dot(&r, &r);
    let max_iter = 20 * nc + 200;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        let rel = rr.sqrt() / bnorm;
        if rr.sqrt() <= (TARGET * bnorm).max(FLOOR * scale) {
            break;
        }
        if rel < 0.5 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 && rr.sqrt() <= ACCEPT * scale {
                break;
            }
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        phi.iter_mut().zip(&p).for_each(|(x, v)| *x += alpha * v);
        r.iter_mut().zip(&ap).for_each(|(x, v)| *x -= alpha * v);
        iterations += 1;
        // refresh the recursive residual periodically against drift
        if iterations % 100 == 0 {
            apply(&phi, &mut ap);
            r.iter_mut().zip(b.iter().zip(&ap)).for_each(|(x, (bv, av))| *x = bv - av);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(x, v)| *x = v + beta * *x);
    }

    let mut corr = vec![0.0; grid.num_dofs()];
    q1.cell_div_t(grid, &phi, &mut corr);
    for i in 0..uf.len() {
        uf[i] -= minv[i] * corr[i];
    }
    let mut div = vec![0.0; nc];
    q1.cell_div(grid, &uf, &mut div);
    let residual = norm(&div) / scale;
    if residual > ACCEPT {
        return Err(DomainError::ProjectionDiverged { iterations, residual });
    }
    Ok((VelocityField::from_data(grid, uf)?, LerayReport { iterations, residual }))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{divergence, Grid};
    use std::f64::consts::PI;

    fn rough(g: &Grid) -> VelocityField {
        VelocityField::from_fn(g, |x| {
            [(3.0 * x[0]).sin() + x[1] * x[1], (2.0 * x[1] + x[0]).cos(), (x[0] * x[1]).exp()]
        })
    }

    #[test]
    fn projected_field_is_divergence_free_and_idempotent() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 1.0, 6, true).unwrap();
            let u = rough(&g);
            for adm in [Admissibility::Impermeable, Admissibility::SlipNoSlip] {
                let (v, rep) = leray_project_with(&u, adm).unwrap();
                assert!(divergence(&v).norm_l2() <= 1e-10 * v.norm_l2(), "{rep:?}");
                let (w, _) = leray_project_with(&v, adm).unwrap();
                assert!(w.sub(&v).max_abs() <= 1e-10 * v.max_abs());
                let n = g.normal_axis();
                for node in 0..g.num_nodes() {
                    if g.multi_index(node)[n] == 0 {
                        assert_eq!(v.get(n, node), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn pure_gradient_is_removed() {
        let g = Grid::new(2, 1.0, 16, true).unwrap();
        // ∇φ for φ = cos(πx₁)cos(πx₂): zero normal derivative on every face
        let u = VelocityField::from_fn(&g, |x| {
            [-PI * (PI * x[0]).sin() * (PI * x[1]).cos(), -PI * (PI * x[0]).cos() * (PI * x[1]).sin(), 0.0]
        });
        let v = leray_project(&u).unwrap();
        assert!(v.norm_l2() < 0.05 * u.norm_l2(), "{}", v.norm_l2() / u.norm_l2());
    }

    #[test]
    fn solenoidal_field_nearly_unchanged() {
        let errs: Vec<f64> = [8, 16]
            .iter()
            .map(|&k| {
                let g = Grid::new(2, 1.0, k, true).unwrap();
                // ψ = (1−x₁²)² e^{x₁} x₂²(1−x₂)²: ψ and ∇ψ vanish on the boundary
                let u = VelocityField::from_fn(&g, |x| {
                    let (a, b) = (x[0], x[1]);
                    let p = (1.0 - a * a).powi(2) * a.exp();
                    let dp = a.exp() * ((1.0 - a * a).powi(2) - 4.0 * a * (1.0 - a * a));
                    let q = b * b * (1.0 - b).powi(2);
                    let dq = 2.0 * b * (1.0 - b) * (1.0 - 2.0 * b);
                    [p * dq, -dp * q, 0.0]
                });
                leray_project(&u).unwrap().sub(&u).norm_l2() / u.norm_l2()
            })
            .collect();
        assert!(errs[1] < 0.05, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }
}
