use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::energy::{gaussian_transport, smooth_u0};
use super::{spread, ExperimentError, ExperimentReport, Table};
use crate::constitutive::{Law, PPotential};
use crate::domain::{
    difference_quotient, gradient_field, lp_norm, partial, regularity_functionals, sym_gradient_field, Grid, Region,
    VelocityField,
};
use crate::expr::FieldSpec;
use crate::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use crate::stokes_basis::solve_eigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityParams {
    /// Coarse grid; the comparison grid doubles its cells.
    pub grid: Grid,
    /// Distance of the interior region from the outer faces.
    pub margin: f64,
    pub law: Law,
    pub exponents: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub u0: FieldSpec,
    pub f: FieldSpec,
    pub v: FieldSpec,
    pub lemma_fields: usize,
    pub lemma_exponents: Vec<f64>,
    pub refinement_factor: f64,
    pub quotient_tol: f64,
    pub oracle_tol: f64,
    pub seed: u64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        RegularityParams {
            grid: Grid::new(2, 1.0, 8, true).expect("valid grid"),
            margin: 0.5,
            law: Law::PowerLawB,
            exponents: vec![1.9, 2.5],
            delta: 1.0,
            mu: 1.0,
            modes: 16,
            dt: 1e-2,
            t_final: 0.5,
            u0: smooth_u0(),
            f: FieldSpec::new(["sin(pi*x1)", "cos(pi*x1)*x2"]),
            v: gaussian_transport(),
            lemma_fields: 100,
            lemma_exponents: vec![1.9, 2.0, 2.5],
            refinement_factor: 2.0,
            quotient_tol: 0.25,
            oracle_tol: 0.10,
            seed: 0,
        }
    }
}

/// Random band-limited scalar field `Σ a sin(k·x + φ)` with `|k_i| ≤ 4`.
fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = grid.dim();
    let terms: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            let mut k = [0.0; 3];
            k.iter_mut().take(d).for_each(|ki| *ki = rng.random_range(-4.0..4.0));
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    (0..grid.num_nodes())
        .map(|n| {
            let x = grid.coords(n);
            terms.iter().map(|(k, a, ph)| a * (k.iter().zip(&x).map(|(ki, xi)| ki * xi).sum::<f64>() + ph).sin()).sum()
        })
        .collect()
}

/// Largest `‖Δ_{λ,k} g‖_{p,Ω′} / (λ ‖∂_k g‖_{p,Ω})` over random fields.
fn lemma_ratio(grid: &Grid, region: &Region, params: &RegularityParams) -> Result<(f64, usize), ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let h = grid.h();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..params.lemma_fields {
        let g = band_limited(grid, &mut rng);
        for axis in 0..grid.dim() {
            let dg = partial(grid, &g, axis);
            for &p in &params.lemma_exponents {
                let rhs = lp_norm(grid, &dg, p, None);
                for lambda in [h, 2.0 * h, 4.0 * h] {
                    let q = difference_quotient(grid, &g, lambda, axis, region)?;
                    let lhs = lp_norm(grid, &q, p, Some(region));
                    if rhs > 0.0 {
                        worst = worst.max(lhs / (lambda * rhs));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok((worst, cases))
}

/// Time-integrated functionals along one trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
struct Trajectory {
    sup_grad_sq: f64,
    weighted_hessian: f64,
    time_derivative_sq: f64,
    /// `I_λ/λ²` at `λ ∈ {h, 2h, 4h}`, final time, tangential axis.
    i_lambda: [f64; 3],
}

fn grad_sq(u: &VelocityField, region: &Region) -> f64 {
    let g = u.grid();
    let d = g.dim();
    let w = region.weights(g);
    gradient_field(u)
        .iter()
        .zip(&w)
        .map(|(m, w)| w * (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum::<f64>())
        .sum()
}

fn trajectory(
    params: &RegularityParams,
    grid: &Grid,
    p: f64,
) -> Result<(Trajectory, Vec<VelocityField>, DVector<f64>), ExperimentError> {
    let region = Region::with_margin(grid, params.margin)?;
    let basis = solve_eigen(grid, params.modes)?;
    let d = grid.dim();
    let pp = PPotential::new(params.law, p, params.delta, params.mu)?;
    let (f, v) = (params.f.compile(d)?, params.v.compile(d)?);
    let sys = GalerkinSystem::new(&basis, pp, Some(&f), Some(&v), false)?;
    let (c0, _) = project_initial(&sys, &params.u0.compile(d)?.sample(grid, 0.0)?)?;
    let steps = (params.t_final / params.dt).round() as usize;
    let (_, coeffs, _) = simulate_from(&sys, c0, params.dt, steps, NewtonSettings::default())?;
    let fields: Vec<VelocityField> = coeffs.iter().map(|c| sys.reconstruct(c)).collect();
    let h = grid.h();
    let mut t = Trajectory { sup_grad_sq: 0.0, weighted_hessian: 0.0, time_derivative_sq: 0.0, i_lambda: [0.0; 3] };
    for (n, u) in fields.iter().enumerate() {
        t.sup_grad_sq = t.sup_grad_sq.max(grad_sq(u, &region));
        if n > 0 {
            t.weighted_hessian += params.dt * regularity_functionals(u, &pp, h, 0, &region)?.weighted_hessian;
            let du = u.sub(&fields[n - 1]).scaled(1.0 / params.dt);
            let w = region.weights(grid);
            let nn = grid.num_nodes();
            t.time_derivative_sq +=
                params.dt * du.data().iter().enumerate().map(|(i, v)| w[i % nn] * v * v).sum::<f64>();
        }
    }
    let last = fields.last().expect("nonempty");
    for (slot, k) in t.i_lambda.iter_mut().zip([1.0, 2.0, 4.0]) {
        *slot = regularity_functionals(last, &pp, k * h, 0, &region)?.i_lambda_scaled;
    }
    Ok((t, fields, coeffs.last().expect("nonempty").clone()))
}

/// `∫_{Ω′} |∇D u|²` through the mode Gram matrix, compared with the direct
/// evaluation (linear case).
fn gram_oracle(params: &RegularityParams, grid: &Grid) -> Result<(f64, f64), ExperimentError> {
    let region = Region::with_margin(grid, params.margin)?;
    let basis = solve_eigen(grid, params.modes)?;
    let d = grid.dim();
    let pp = PPotential::new(params.law, 2.0, params.delta, params.mu)?;
    let f = params.f.compile(d)?;
    let sys = GalerkinSystem::new(&basis, pp, Some(&f), None, false)?;
    let (c0, _) = project_initial(&sys, &params.u0.compile(d)?.sample(grid, 0.0)?)?;
    let steps = (params.t_final / params.dt).round() as usize;
    let (_, coeffs, _) = simulate_from(&sys, c0, params.dt, steps, NewtonSettings::default())?;
    let c = coeffs.last().expect("nonempty");
    let direct = regularity_functionals(&sys.reconstruct(c), &pp, grid.h(), 0, &region)?.weighted_hessian;

    let w = region.weights(grid);
    let cols: Vec<Vec<f64>> = basis
        .modes()
        .iter()
        .map(|m| {
            let dk = sym_gradient_field(&m.velocity);
            let ns = crate::tensor::nsym(d);
            let mut col = Vec::new();
            for s in 0..ns {
                let comp: Vec<f64> = dk.values.iter().map(|t| t.to_kelvin()[s]).collect();
                for a in 0..d {
                    col.extend(partial(grid, &comp, a).iter().zip(&w).map(|(v, w)| v * w.sqrt()));
                }
            }
            col
        })
        .collect();
    let m = cols.len();
    let a = DMatrix::from_fn(cols[0].len(), m, |i, k| cols[k][i]);
    let gram = a.tr_mul(&a);
    let spectral = c.dot(&(&gram * c));
    Ok((direct, spectral))
}

/// Regularity functionals under refinement, the difference-quotient
/// inequality and the linear Gram oracle.
pub fn run_regularity(params: &RegularityParams) -> Result<ExperimentReport, ExperimentError> {
    let mut report = ExperimentReport::new("regularity", params);
    report.seeds.push(params.seed);
    report.truncation_radius = Some(params.grid.radius());
    let coarse = params.grid.clone();
    let fine = coarse.refined();
    if params.margin < 4.0 * coarse.h() {
        return Err(ExperimentError::Invalid(format!("margin {} is below four coarse cells", params.margin)));
    }

    for grid in [&coarse, &fine] {
        let region = Region::with_margin(grid, params.margin)?;
        let (ratio, cases) = lemma_ratio(grid, &region, params)?;
        report.at_most(&format!("lemma_ratio_cells{}", grid.cells()), ratio, 1.0);
        report.measure(&format!("lemma_cases_cells{}", grid.cells()), cases);
    }

    let mut table = Table::new(
        "functionals",
        &["p", "cells", "sup_grad_sq", "weighted_hessian", "time_derivative_sq", "i_h", "i_2h", "i_4h"],
    );
    for &p in &params.exponents {
        let (tc, _, _) = trajectory(params, &coarse, p)?;
        let (tf, _, _) = trajectory(params, &fine, p)?;
        for (cells, t) in [(coarse.cells(), &tc), (fine.cells(), &tf)] {
            table.push(vec![
                p,
                cells as f64,
                t.sup_grad_sq,
                t.weighted_hessian,
                t.time_derivative_sq,
                t.i_lambda[0],
                t.i_lambda[1],
                t.i_lambda[2],
            ]);
            report.at_most(
                &format!("p{p}_cells{cells}_quotient_h_vs_2h"),
                spread(t.i_lambda[0], t.i_lambda[1]) - 1.0,
                params.quotient_tol,
            );
        }
        let tag = format!("p{p}");
        report.at_most(
            &format!("{tag}_sup_grad_sq_refinement"),
            spread(tc.sup_grad_sq, tf.sup_grad_sq),
            params.refinement_factor,
        );
        report.at_most(
            &format!("{tag}_weighted_hessian_refinement"),
            spread(tc.weighted_hessian, tf.weighted_hessian),
            params.refinement_factor,
        );
        report.at_most(
            &format!("{tag}_time_derivative_refinement"),
            spread(tc.time_derivative_sq, tf.time_derivative_sq),
            params.refinement_factor,
        );
    }
    report.tables.push(table);

    let (direct, spectral) = gram_oracle(params, &coarse)?;
    report.at_most(
        "linear_gram_oracle_rel",
        (direct - spectral).abs() / direct.abs().max(f64::MIN_POSITIVE),
        params.oracle_tol,
    );
    Ok(report.finish())
}
