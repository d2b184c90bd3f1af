use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentReport, Table};
use crate::domain::{divergence, Grid};
use crate::stokes_basis::{solve_eigen, StokesBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisParams {
    pub radius: f64,
    pub modes: usize,
    /// Cells per radius of the 2D grid and of its refinement.
    pub cells_2d: usize,
    pub cells_2d_refined: usize,
    /// Cells per radius of the 3D grid; zero skips the 3D solve.
    pub cells_3d: usize,
    pub orthonormality_tol: f64,
    pub rayleigh_tol: f64,
    pub divergence_tol: f64,
    pub refinement_tol: f64,
    pub time_budget_seconds: f64,
}

impl Default for BasisParams {
    fn default() -> Self {
        BasisParams {
            radius: 1.0,
            modes: 10,
            cells_2d: 12,
            cells_2d_refined: 16,
            cells_3d: 5,
            orthonormality_tol: 1e-8,
            rayleigh_tol: 1e-6,
            divergence_tol: 1e-10,
            refinement_tol: 0.05,
            time_budget_seconds: 120.0,
        }
    }
}

fn max_offdiag_identity(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

fn check_basis(report: &mut ExperimentReport, tag: &str, b: &StokesBasis, params: &BasisParams) {
    report.at_most(&format!("{tag}_orthonormality"), max_offdiag_identity(&b.mass_gram()), params.orthonormality_tol);
    let mass = b.mass_gram();
    let strain = b.strain_gram();
    let lam = b.lambdas();
    let n = lam.len();
    let mut rayleigh = 0.0f64;
    let mut offdiag = 0.0f64;
    for i in 0..n {
        rayleigh = rayleigh.max((strain[(i, i)] / mass[(i, i)] - lam[i]).abs() / lam[i]);
        for j in 0..n {
            if i != j {
                offdiag = offdiag.max(strain[(i, j)].abs() / lam[i].max(lam[j]));
            }
        }
    }
    report.at_most(&format!("{tag}_rayleigh_rel"), rayleigh, params.rayleigh_tol);
    report.at_most(&format!("{tag}_strain_offdiag_rel"), offdiag, params.rayleigh_tol);
    report.at_least(&format!("{tag}_min_lambda"), lam.iter().cloned().fold(f64::INFINITY, f64::min), f64::MIN_POSITIVE);
    report.holds(&format!("{tag}_ascending"), lam.windows(2).all(|w| w[0] <= w[1]));
    let div = b.modes().iter().map(|m| divergence(&m.velocity).max_abs()).fold(0.0, f64::max);
    report.at_most(&format!("{tag}_max_cell_divergence"), div, params.divergence_tol);
    report.measure(&format!("{tag}_lambdas"), &lam);
    report.measure(&format!("{tag}_subspace_dim"), b.subspace_dim());
    report.measure(&format!("{tag}_pressure_misfit"), b.pressure_misfit());
}

/// Eigenbasis invariants on the 2D and 3D acceptance grids plus
/// refinement and domain-monotonicity checks.
pub fn run_basis(params: &BasisParams) -> Result<ExperimentReport, ExperimentError> {
    let mut report = ExperimentReport::new("basis", params);
    report.truncation_radius = Some(params.radius);
    let m = params.modes;

    let g2 = Grid::new(2, params.radius, params.cells_2d, true)?;
    let b2 = solve_eigen(&g2, m)?;
    check_basis(&mut report, "2d", &b2, params);

    let g2r = Grid::new(2, params.radius, params.cells_2d_refined, true)?;
    let b2r = solve_eigen(&g2r, m)?;
    check_basis(&mut report, "2d_refined", &b2r, params);
    let (l, lr) = (b2.lambdas(), b2r.lambdas());
    let shift = l.iter().zip(&lr).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    report.at_most("2d_refinement_shift_rel", shift, params.refinement_tol);

    // Shrinking the domain raises the spectrum; same cell count keeps the
    // comparison at equal resolution relative to the domain.
    let small = solve_eigen(&Grid::new(2, 0.5 * params.radius, params.cells_2d, true)?, 1)?;
    report.at_least("lambda1_half_radius_over_lambda1", small.lambdas()[0] / l[0], 1.0 + 1e-12);

    let mut table = Table::new("eigenvalues", &["index", "lambda_2d", "lambda_2d_refined", "lambda_3d"]);
    let l3 = if params.cells_3d > 0 {
        let g3 = Grid::new(3, params.radius, params.cells_3d, true)?;
        let b3 = solve_eigen(&g3, m)?;
        check_basis(&mut report, "3d", &b3, params);
        b3.lambdas()
    } else {
        vec![f64::NAN; m]
    };
    for i in 0..m {
        table.push(vec![i as f64, l[i], lr[i], l3[i]]);
    }
    report.tables.push(table);
    let mut report = report.finish();
    let elapsed = report.runtime_seconds;
    report.at_most("runtime_seconds", elapsed, params.time_budget_seconds);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_basis_report_passes() {
        let p = BasisParams {
            cells_2d: 4,
            cells_2d_refined: 6,
            cells_3d: 0,
            modes: 4,
            refinement_tol: 0.5,
            ..Default::default()
        };
        let r = run_basis(&p).unwrap();
        assert!(r.passed, "{:?}", r.failed_checks());
    }
}
