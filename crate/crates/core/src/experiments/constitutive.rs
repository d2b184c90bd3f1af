use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentReport, Table};
use crate::constitutive::{certify_bounds, Law, PPotential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub laws: Vec<Law>,
    pub exponents: Vec<f64>,
    pub delta: f64,
    pub mu: f64,
    pub dim: usize,
    pub samples: usize,
    pub magnitude_range: (f64, f64),
    pub gradient_tol: f64,
    pub time_budget_seconds: f64,
    pub seed: u64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            laws: vec![Law::PowerLawA, Law::PowerLawB],
            exponents: vec![1.9, 2.0, 2.5, 3.0],
            delta: 1.0,
            mu: 1.0,
            dim: 3,
            samples: 100_000,
            magnitude_range: (1e-3, 1e3),
            gradient_tol: 1e-6,
            time_budget_seconds: 30.0,
            seed: 0,
        }
    }
}

/// Sampling certificates for every (law, p) pair.
pub fn run_verify(params: &VerifyParams) -> Result<ExperimentReport, ExperimentError> {
    let mut report = ExperimentReport::new("verify", params);
    report.seeds.push(params.seed);
    let mut table = Table::new(
        "certificates",
        &["law", "p", "gamma1", "gamma2", "c1gamma1", "c2gamma2", "coercivity", "growth", "gradient_err", "violations"],
    );
    let mut certs = Vec::new();
    for (li, &law) in params.laws.iter().enumerate() {
        for &p in &params.exponents {
            let pp = PPotential::new(law, p, params.delta, params.mu)?;
            let c = certify_bounds(&pp, params.dim, params.samples, params.magnitude_range, params.seed)?;
            let tag = format!("{}_p{p}", law_tag(law));
            report.at_most(&format!("{tag}_violations"), c.violations as f64, 0.0);
            report.at_most(&format!("{tag}_gradient_rel_err"), c.gradient_max_rel_err, params.gradient_tol);
            report.at_least(&format!("{tag}_monotonicity_min"), c.monotonicity_min, 0.0);
            let upper = c.gamma2_est.max(c.c2gamma2_est).max(c.growth_est);
            report.holds(&format!("{tag}_upper_ratios_finite"), upper.is_finite());
            table.push(vec![
                li as f64,
                p,
                c.gamma1_est,
                c.gamma2_est,
                c.c1gamma1_est,
                c.c2gamma2_est,
                c.coercivity_est,
                c.growth_est,
                c.gradient_max_rel_err,
                c.violations as f64,
            ]);
            certs.push(c);
        }
    }
    report.measure("certificates", &certs);
    report.tables.push(table);
    let mut report = report.finish();
    let elapsed = report.runtime_seconds;
    report.at_most("runtime_seconds", elapsed, params.time_budget_seconds);
    Ok(report.finish())
}

pub(crate) fn law_tag(law: Law) -> &'static str {
    match law {
        Law::PowerLawA => "power_a",
        Law::PowerLawB => "power_b",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_certificate_passes() {
        let params = VerifyParams { samples: 200, exponents: vec![1.9, 2.5], ..Default::default() };
        let r = run_verify(&params).unwrap();
        assert!(r.passed, "{:?}", r.failed_checks());
        assert_eq!(r.tables[0].rows.len(), 4);
    }
}
