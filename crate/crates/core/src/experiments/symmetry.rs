use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentReport, Table};
use crate::constitutive::{Law, PPotential};
use crate::domain::{mirror, reflect, restrict, slip_trace_residual, Admissibility, Grid, VelocityField};
use crate::expr::FieldSpec;
use crate::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use crate::stokes_basis::{divfree_subspace, StokesBasis, StokesOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymmetryParams {
    pub dim: usize,
    pub radius: f64,
    /// Cells per radius at the coarse level; levels 2× and 4× (the
    /// reference) follow.
    pub cells: usize,
    /// Full-box modes requested (extended to a spectral gap).
    pub modes: usize,
    pub law: Law,
    pub p: f64,
    pub delta: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Half-space data with tangential components even and the normal one
    /// odd in `x_n` near the plane.
    pub u0: FieldSpec,
    pub f: FieldSpec,
    pub v: FieldSpec,
    pub defect_tol: f64,
    pub commutation_tol: f64,
    pub envelope_ratio: f64,
    pub seed: u64,
}

impl Default for SymmetryParams {
    fn default() -> Self {
        SymmetryParams {
            dim: 2,
            radius: 1.0,
            cells: 4,
            modes: 16,
            law: Law::PowerLawB,
            p: 2.5,
            delta: 1.0,
            mu: 1.0,
            dt: 2e-3,
            t_final: 0.5,
            u0: FieldSpec::new(["(1-x2^2)*(1-5*x2^2)*(1-x1^2)^2", "4*x1*x2*(1-x2^2)^2*(1-x1^2)"]),
            f: FieldSpec::new(["sin(pi*x1)*cos(pi*x2)", "x2*cos(pi*x1)"]),
            v: FieldSpec::new(["(1 - 2*x2^2)*exp(-x1^2 - x2^2)", "2*x1*x2*exp(-x1^2 - x2^2)"]),
            defect_tol: 1e-10,
            commutation_tol: 1e-10,
            envelope_ratio: 3.0,
            seed: 0,
        }
    }
}

struct Level {
    half: Grid,
    full_basis: StokesBasis,
    half_basis: StokesBasis,
    dt: f64,
    steps: usize,
}

/// Full-box basis cut at a spectral gap and split by parity.
fn full_basis(params: &SymmetryParams, cells: usize) -> Result<(Grid, StokesBasis), ExperimentError> {
    let half = Grid::new(params.dim, params.radius, cells, true)?;
    let full = half.full();
    let mut b = StokesBasis::from_subspace(&divfree_subspace(&full, Admissibility::SlipNoSlip)?, params.modes, true)?;
    b.symmetry_adapt()?;
    Ok((half, b))
}

fn even_count(b: &StokesBasis) -> usize {
    b.parity().expect("adapted").iter().filter(|&&s| s > 0.0).count()
}

/// Drops even modes beyond the first `keep_even` (the span stays
/// mirror-invariant) and builds the matching half-space basis.
fn build_level(
    (half, mut full_basis): (Grid, StokesBasis),
    keep_even: usize,
    dt: f64,
    t_final: f64,
) -> Result<Level, ExperimentError> {
    let parity = full_basis.parity().expect("adapted").to_vec();
    let mut seen = 0;
    full_basis.retain(|i| {
        if parity[i] > 0.0 {
            seen += 1;
            seen <= keep_even
        } else {
            true
        }
    });
    let half_basis =
        StokesBasis::from_subspace(&divfree_subspace(&half, Admissibility::SlipNoSlip)?, keep_even, false)?;
    let steps = (t_final / dt).round() as usize;
    Ok(Level { half, full_basis, half_basis, dt, steps })
}

struct LevelRun {
    full: Vec<VelocityField>,
    half: Vec<VelocityField>,
    max_symmetry_defect: f64,
    rhs_commutation: f64,
}

fn run_level(level: &Level, params: &SymmetryParams, seed: u64) -> Result<LevelRun, ExperimentError> {
    let pp = PPotential::new(params.law, params.p, params.delta, params.mu)?;
    let d = params.dim;
    let sample =
        |spec: &FieldSpec| -> Result<VelocityField, ExperimentError> { Ok(spec.compile(d)?.sample(&level.half, 0.0)?) };
    let (u0, f, v) = (sample(&params.u0)?, sample(&params.f)?, sample(&params.v)?);
    let newton = NewtonSettings::default();

    let half_sys = GalerkinSystem::with_nodal_data(&level.half_basis, pp, Some(&f), Some(&v))?;
    let (c0, _) = project_initial(&half_sys, &u0)?;
    let (_, hc, _) = simulate_from(&half_sys, c0, level.dt, level.steps, newton)?;

    let full_sys = GalerkinSystem::with_nodal_data(&level.full_basis, pp, Some(&reflect(&f)?), Some(&reflect(&v)?))?;
    let (c0, _) = project_initial(&full_sys, &reflect(&u0)?)?;
    let (_, fc, _) = simulate_from(&full_sys, c0, level.dt, level.steps, newton)?;

    let full: Vec<VelocityField> = fc.iter().map(|c| full_sys.reconstruct(c)).collect();
    let half: Vec<VelocityField> = hc.iter().map(|c| half_sys.reconstruct(c)).collect();
    let mut max_symmetry_defect = 0.0f64;
    for u in &full {
        let norm = u.norm_l2();
        if norm > 0.0 {
            max_symmetry_defect = max_symmetry_defect.max(u.sub(&reflect(&restrict(u)?)?).norm_l2() / norm);
        }
    }

    // rhs(P c) = P rhs(c) for random coefficients, P the parity signs.
    let sign = DVector::from_iterator(
        level.full_basis.len(),
        level.full_basis.parity().expect("adapted").iter().map(|s| s.signum()),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DVector::<f64>::from_fn(sign.len(), |_, _| StandardNormal.sample(&mut rng));
    let lhs = full_sys.rhs(&c.component_mul(&sign), 0.0)?;
    let rhs = full_sys.rhs(&c, 0.0)?.component_mul(&sign);
    let rhs_commutation = (&lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    Ok(LevelRun { full, half, max_symmetry_defect, rhs_commutation })
}

/// Nodal injection of a field onto a coarser, nested grid.
fn inject(fine: &VelocityField, coarse: &Grid) -> VelocityField {
    let g = fine.grid();
    let r = g.cells() / coarse.cells();
    let mut out = VelocityField::zeros(coarse);
    for node in 0..coarse.num_nodes() {
        let mut idx = coarse.multi_index(node);
        idx.iter_mut().for_each(|i| *i *= r);
        let src = g.index(&idx[..g.dim()]);
        for c in 0..g.dim() {
            out.set(c, node, fine.get(c, src));
        }
    }
    out
}

/// `sup_t ‖restrict(u_full) − u_ref‖ / sup_t ‖u_ref‖` on the coarse nodes
/// and time levels.
fn envelope_defect(
    run: &LevelRun,
    level: &Level,
    reference: &LevelRun,
    ref_level: &Level,
) -> Result<f64, ExperimentError> {
    let stride = (level.dt / ref_level.dt).round() as usize;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (n, u) in run.full.iter().enumerate() {
        let r = inject(&reference.half[n * stride], &level.half);
        num = num.max(restrict(u)?.sub(&r).norm_l2());
        den = den.max(r.norm_l2());
    }
    Ok(num / den.max(f64::MIN_POSITIVE))
}

/// Stokes operator commutes with the mirror on random full-box fields.
fn operator_commutation(grid: &Grid, seed: u64) -> Result<f64, ExperimentError> {
    let op = StokesOperator::new(grid, Admissibility::SlipNoSlip);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let w =
            VelocityField::from_data(grid, (0..grid.num_dofs()).map(|_| StandardNormal.sample(&mut rng)).collect())?;
        let a = VelocityField::from_data(grid, op.apply(mirror(&w)?.data()))?;
        let b = mirror(&VelocityField::from_data(grid, op.apply(w.data()))?)?;
        worst = worst.max(a.sub(&b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Full-box evolution of reflected data against the half-space evolution.
pub fn run_symmetry(params: &SymmetryParams) -> Result<ExperimentReport, ExperimentError> {
    if params.cells == 0 || !(params.dt > 0.0) || params.t_final < params.dt {
        return Err(ExperimentError::Invalid("need cells > 0 and 0 < dt <= t_final".into()));
    }
    let mut report = ExperimentReport::new("symmetry", params);
    report.seeds.push(params.seed);
    report.truncation_radius = Some(params.radius);

    let bases = [
        full_basis(params, params.cells)?,
        full_basis(params, 2 * params.cells)?,
        full_basis(params, 4 * params.cells)?,
    ];
    // Same number of even modes on every level so that truncation does not
    // enter the refinement comparison.
    let keep_even = bases.iter().map(|(_, b)| even_count(b)).min().expect("three levels");
    let mut levels = Vec::with_capacity(3);
    for (i, b) in bases.into_iter().enumerate() {
        levels.push(build_level(b, keep_even, params.dt / (1 << i) as f64, params.t_final)?);
    }
    let runs: Vec<LevelRun> = levels.iter().map(|l| run_level(l, params, params.seed)).collect::<Result<_, _>>()?;
    let (reference, ref_level) = (&runs[2], &levels[2]);

    let coarse_full = levels[0].half.full();
    report.at_most(
        "stokes_operator_commutation",
        operator_commutation(&coarse_full, params.seed)?,
        params.commutation_tol,
    );

    let mut table = Table::new(
        "levels",
        &[
            "cells",
            "dt",
            "modes_full",
            "modes_half",
            "symmetry_defect",
            "half_vs_full",
            "envelope",
            "slip_normal",
            "slip_tangential",
        ],
    );
    let mut envelopes = Vec::new();
    let mut tangential = Vec::new();
    for (i, (level, run)) in levels.iter().zip(&runs).enumerate() {
        let tag = format!("level{i}");
        report.at_most(&format!("{tag}_symmetry_defect"), run.max_symmetry_defect, params.defect_tol);
        report.at_most(&format!("{tag}_rhs_commutation"), run.rhs_commutation, params.commutation_tol);

        let lam_half = level.half_basis.lambdas();
        let parity = level.full_basis.parity().expect("adapted");
        let lam_even: Vec<f64> =
            level.full_basis.lambdas().into_iter().zip(parity).filter(|(_, s)| **s > 0.0).map(|(l, _)| l).collect();
        let spectrum_gap = lam_half.iter().zip(&lam_even).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        report.at_most(&format!("{tag}_even_spectrum_vs_half"), spectrum_gap, 1e-8);

        let scale = run.half.iter().map(|u| u.norm_l2()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut half_vs_full = 0.0f64;
        for (uf, uh) in run.full.iter().zip(&run.half) {
            half_vs_full = half_vs_full.max(restrict(uf)?.sub(uh).norm_l2() / scale);
        }
        let last = restrict(run.full.last().expect("nonempty"))?;
        let (sn, st) = slip_trace_residual(&last)?;
        let umax = last.max_abs().max(f64::MIN_POSITIVE);
        report.at_most(&format!("{tag}_slip_normal_rel"), sn / umax, 1e-12);
        let envelope = if i < 2 { envelope_defect(run, level, reference, ref_level)? } else { f64::NAN };
        if i < 2 {
            report.at_most(&format!("{tag}_half_vs_full_within_envelope"), half_vs_full, envelope);
            envelopes.push(envelope);
        }
        tangential.push(st / umax);
        table.push(vec![
            level.half.cells() as f64,
            level.dt,
            level.full_basis.len() as f64,
            level.half_basis.len() as f64,
            run.max_symmetry_defect,
            half_vs_full,
            envelope,
            sn / umax,
            st / umax,
        ]);
    }
    report.at_least("envelope_refinement_ratio", envelopes[0] / envelopes[1], params.envelope_ratio);
    report.at_least("slip_tangential_refinement_ratio_1", tangential[0] / tangential[1], params.envelope_ratio);
    report.at_least("slip_tangential_refinement_ratio_2", tangential[1] / tangential[2], params.envelope_ratio);
    report.measure("envelopes", &envelopes);
    report.measure("slip_tangential", &tangential);
    report.tables.push(table);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SymmetryParams {
        SymmetryParams { cells: 3, modes: 6, dt: 0.02, t_final: 0.1, ..Default::default() }
    }

    #[test]
    fn forced_rest_stays_symmetric() {
        let params = SymmetryParams { u0: FieldSpec::default(), ..small() };
        let r = run_symmetry(&params).unwrap();
        for c in r.checks.iter().filter(|c| c.name.contains("defect") || c.name.contains("commutation")) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn injection_picks_nested_nodes() {
        let coarse = Grid::new(2, 1.0, 2, true).unwrap();
        let fine = coarse.refined().refined();
        let u = VelocityField::from_fn(&fine, |x| [x[0] + 2.0 * x[1], x[1], 0.0]);
        let v = inject(&u, &coarse);
        assert_eq!(v, VelocityField::from_fn(&coarse, |x| [x[0] + 2.0 * x[1], x[1], 0.0]));
    }
}
