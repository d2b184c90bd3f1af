use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::energy::{gaussian_transport, smooth_u0};
use super::{ExperimentError, ExperimentReport, Table};
use crate::constitutive::{Law, PPotential};
use crate::domain::Grid;
use crate::expr::FieldSpec;
use crate::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use crate::stokes_basis::{solve_eigen, StokesBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessParams {
    pub grid: Grid,
    pub law: Law,
    pub exponents: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub modes: usize,
    pub dt: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub twin_tol: f64,
    pub ledger_tol: f64,
    pub oracle_tol: f64,
}

impl Default for UniquenessParams {
    fn default() -> Self {
        UniquenessParams {
            grid: Grid::new(2, 1.0, 6, true).expect("valid grid"),
            law: Law::PowerLawB,
            exponents: vec![1.9, 2.0, 2.5],
            delta: 1.0,
            mu: 1.0,
            modes: 16,
            dt: 1e-2,
            steps: 100,
            epsilon: 1e-3,
            seed: 0,
            twin_tol: 1e-12,
            ledger_tol: 1e-9,
            oracle_tol: 1e-10,
        }
    }
}

fn unit_vector(m: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let n = w.norm();
    w / n
}

struct PairStats {
    errors: Vec<f64>,
    max_increase: f64,
    max_ledger: f64,
}

/// Runs `c0` and `c0 + eps·w` side by side and measures `‖e‖` and the
/// discrete difference identity.
fn pair_run(
    sys: &GalerkinSystem<'_>,
    c0: &DVector<f64>,
    w: &DVector<f64>,
    eps: f64,
    dt: f64,
    steps: usize,
) -> Result<PairStats, ExperimentError> {
    let newton = NewtonSettings::default();
    let (times, a, _) = simulate_from(sys, c0.clone(), dt, steps, newton)?;
    let (_, b, _) = simulate_from(sys, c0 + w * eps, dt, steps, newton)?;
    let errors: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).collect();
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_ledger = f64::NEG_INFINITY;
    for n in 0..steps {
        max_increase = max_increase.max(errors[n + 1] - errors[n]);
        let t = times[n + 1];
        let e = &a[n + 1] - &b[n + 1];
        let ds = sys.stress(&a[n + 1], t)?.force - sys.stress(&b[n + 1], t)?.force;
        let ledger = (errors[n + 1].powi(2) - errors[n].powi(2)) / dt + 2.0 * ds.dot(&e);
        max_ledger = max_ledger.max(ledger);
    }
    Ok(PairStats { errors, max_increase, max_ledger })
}

/// Twin and perturbed runs for every exponent, plus the linear closed form.
pub fn run_uniqueness(params: &UniquenessParams) -> Result<ExperimentReport, ExperimentError> {
    if !(params.epsilon >= 0.0) || params.steps == 0 {
        return Err(ExperimentError::Invalid("epsilon must be nonnegative and steps positive".into()));
    }
    let mut report = ExperimentReport::new("uniqueness", params);
    report.seeds.push(params.seed);
    report.truncation_radius = Some(params.grid.radius());
    let basis: StokesBasis = solve_eigen(&params.grid, params.modes)?;
    let d = params.grid.dim();
    let u0 = smooth_u0().compile(d)?.sample(&params.grid, 0.0)?;
    let f = FieldSpec::new(["sin(pi*x1)", "cos(pi*x1)*x2"]).compile(d)?;
    let v = gaussian_transport().compile(d)?;
    let w = unit_vector(basis.len(), params.seed);

    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(params.exponents.iter().map(|p| format!("e_p{p}")));
    let mut table = Table { name: "errors".into(), header, rows: Vec::new() };
    let mut columns = Vec::new();
    for &p in &params.exponents {
        let pp = PPotential::new(params.law, p, params.delta, params.mu)?;
        let sys = GalerkinSystem::new(&basis, pp, Some(&f), Some(&v), false)?;
        let (c0, _) = project_initial(&sys, &u0)?;
        let tag = format!("p{p}");

        let twin = pair_run(&sys, &c0, &w, 0.0, params.dt, params.steps)?;
        let twin_max = twin.errors.iter().cloned().fold(0.0, f64::max);
        report.at_most(&format!("{tag}_twin_max_error"), twin_max, params.twin_tol);

        let pert = pair_run(&sys, &c0, &w, params.epsilon, params.dt, params.steps)?;
        report.at_most(&format!("{tag}_max_error_increase"), pert.max_increase, 0.0);
        report.at_most(&format!("{tag}_difference_ledger"), pert.max_ledger, params.ledger_tol);
        report.at_least(&format!("{tag}_steps"), params.steps as f64, 100.0);
        report.measure(&format!("{tag}_final_error"), pert.errors.last().copied());
        columns.push(pert.errors);
    }
    for n in 0..=params.steps {
        let mut row = vec![n as f64, n as f64 * params.dt];
        row.extend(columns.iter().map(|c| c[n]));
        table.push(row);
    }
    report.tables.push(table);

    // Linear oracle: with p = 2 and no data the error decays mode by mode.
    let newtonian = PPotential::new(params.law, 2.0, params.delta, params.mu)?;
    let sys = GalerkinSystem::new(&basis, newtonian, None, None, false)?;
    let (c0, _) = project_initial(&sys, &u0)?;
    let lin = pair_run(&sys, &c0, &w, params.epsilon, params.dt, params.steps)?;
    let lam = basis.lambdas();
    let mut worst = 0.0f64;
    for (n, e) in lin.errors.iter().enumerate() {
        let exact = params.epsilon
            * w.iter()
                .zip(&lam)
                .map(|(wk, l)| (wk / (1.0 + params.dt * params.mu * l).powi(n as i32)).powi(2))
                .sum::<f64>()
                .sqrt();
        if exact > 0.0 {
            worst = worst.max((e - exact).abs() / exact);
        }
    }
    report.at_most("linear_closed_form_rel_err", worst, params.oracle_tol);
    report.at_most("linear_max_error_increase", lin.max_increase, 0.0);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_uniqueness_passes() {
        let p = UniquenessParams {
            grid: Grid::new(2, 1.0, 4, true).unwrap(),
            exponents: vec![2.5],
            modes: 6,
            steps: 100,
            ..Default::default()
        };
        let r = run_uniqueness(&p).unwrap();
        assert!(r.passed, "{:?}", r.failed_checks());
    }

    #[test]
    fn negative_perturbation_is_rejected() {
        let p = UniquenessParams { epsilon: -1.0, ..Default::default() };
        assert!(matches!(run_uniqueness(&p), Err(ExperimentError::Invalid(_))));
    }
}
