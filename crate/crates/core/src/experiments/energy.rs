use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentReport, Table};
use crate::config::SimConfig;
use crate::constitutive::{Law, PPotential};
use crate::domain::Grid;
use crate::expr::FieldSpec;
use crate::solver::{simulate, EnergyLedger, SimOutcome, STEP_SLACK_TOL, TRANSPORT_TOL};
use crate::stokes_basis::StokesBasis;

/// Newton iterations allowed per step on acceptance runs.
pub const NEWTON_ITERATION_LIMIT: usize = 10;

pub(crate) fn ledger_table(ledger: &EnergyLedger) -> Table {
    let mut t = Table::new(
        "ledger",
        &[
            "step",
            "t",
            "energy",
            "dissipation",
            "work",
            "transport",
            "transport_literal",
            "newton_iterations",
            "newton_residual",
            "slack",
        ],
    );
    t.push(vec![0.0, 0.0, ledger.initial_energy, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    for r in &ledger.rows {
        t.push(vec![
            r.step as f64,
            r.t,
            r.energy,
            r.dissipation,
            r.work,
            r.transport,
            r.transport_literal,
            r.newton_iterations as f64,
            r.newton_residual,
            r.slack,
        ]);
    }
    t
}

/// Runs one configuration and checks its energy ledger.
pub fn run_simulation(cfg: &SimConfig) -> Result<(ExperimentReport, StokesBasis, SimOutcome), ExperimentError> {
    let mut report = ExperimentReport::new("simulate", cfg);
    report.seeds.push(cfg.seed);
    report.truncation_radius = Some(cfg.grid.radius());
    let (basis, out) = simulate(cfg)?;
    let s = &out.summary;
    report.at_most("max_step_slack", s.max_slack, STEP_SLACK_TOL);
    report.at_most("bound_lhs_over_data", s.bound_lhs, s.bound_constant * s.data_size);
    report.at_most("max_transport_ratio", s.max_transport_ratio, TRANSPORT_TOL);
    report.at_most("max_newton_iterations", s.max_newton_iterations as f64, NEWTON_ITERATION_LIMIT as f64);
    report.measure("summary", s);
    report.measure("empirical_constant", s.empirical_constant);
    report.measure("projection_error", out.projection_error);
    report.measure("lambdas", basis.lambdas());
    report.tables.push(ledger_table(&out.ledger));
    Ok((report.finish(), basis, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySuiteParams {
    pub grid: Grid,
    pub law: Law,
    pub exponents: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub time_budget_seconds: f64,
}

impl Default for EnergySuiteParams {
    fn default() -> Self {
        EnergySuiteParams {
            grid: Grid::new(2, 1.0, 8, true).expect("valid grid"),
            law: Law::PowerLawB,
            exponents: vec![1.9, 2.5],
            delta: 1.0,
            mu: 1.0,
            modes: 16,
            dt: 1e-2,
            t_final: 1.0,
            time_budget_seconds: 60.0,
        }
    }
}

/// Smooth solenoidal initial velocity (curl of `x₂²(1−x₂)²(1−x₁²)²`).
pub(crate) fn smooth_u0() -> FieldSpec {
    FieldSpec::new(["2*x2*(1-x2)*(1-2*x2)*(1-x1^2)^2", "4*x1*x2^2*(1-x2)^2*(1-x1^2)"])
}

/// Solenoidal transport field tangential to the plane.
pub(crate) fn gaussian_transport() -> FieldSpec {
    FieldSpec::new(["(2*x2 - 2*x2^3) * exp(-x1^2 - x2^2)", "2*x1*x2^2 * exp(-x1^2 - x2^2)"])
}

/// The three forcing regimes: none, steady and oscillatory.
pub(crate) fn forcings() -> [(&'static str, FieldSpec); 3] {
    [
        ("unforced", FieldSpec::default()),
        ("steady", FieldSpec::new(["sin(pi*x1)", "cos(pi*x1)*x2"])),
        ("oscillatory", FieldSpec::new(["sin(pi*x1)*cos(2*pi*t)", "x2*sin(4*t)"])),
    ]
}

/// Energy ledger on {unforced, steady, oscillatory} × exponents, all with a
/// nonzero transport field.
pub fn run_energy_suite(params: &EnergySuiteParams) -> Result<ExperimentReport, ExperimentError> {
    let mut report = ExperimentReport::new("energy", params);
    report.truncation_radius = Some(params.grid.radius());
    let mut constants =
        Table::new("constants", &["p", "forcing", "empirical_constant", "max_slack", "max_transport", "runtime"]);
    for &p in &params.exponents {
        let pp = PPotential::new(params.law, p, params.delta, params.mu)?;
        for (fi, (name, f)) in forcings().into_iter().enumerate() {
            let mut cfg = SimConfig::new(params.grid.clone(), pp, params.modes, params.t_final, params.dt);
            cfg.u0 = smooth_u0();
            cfg.v = gaussian_transport();
            cfg.f = f;
            let (r, _, out) = run_simulation(&cfg)?;
            let runtime = r.runtime_seconds;
            constants.push(vec![
                p,
                fi as f64,
                out.summary.empirical_constant,
                out.summary.max_slack,
                out.summary.max_transport_ratio,
                runtime,
            ]);
            let prefix = format!("p{p}_{name}_");
            report.absorb(&prefix, r);
            report.at_most(&format!("{prefix}runtime_seconds"), runtime, params.time_budget_seconds);
        }
    }
    report.tables.push(constants);
    Ok(report.finish())
}
