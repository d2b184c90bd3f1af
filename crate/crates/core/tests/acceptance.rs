//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slipflow_core::experiments::*;
use slipflow_core::expr::FieldSpec;
use slipflow_core::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use slipflow_core::stokes_basis::solve_eigen;
use slipflow_core::{Grid, Law, PPotential, SymTensor};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn summarize(r: ExperimentReport) -> Outcome {
    let failed: Vec<String> = r.failed_checks().iter().map(|c| format!("{}={:.3e}", c.name, c.value)).collect();
    let detail = if failed.is_empty() {
        format!("{} checks, {:.2} s", r.checks.len(), r.runtime_seconds)
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok((r.passed, detail))
}

fn run<E: std::fmt::Display>(r: Result<ExperimentReport, E>) -> Outcome {
    r.map_err(|e| e.to_string()).and_then(summarize)
}

/// Stress equals μB bit for bit at p = 2, and the linear flow matches the
/// closed-form implicit-Euler decay of every mode.
fn newtonian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut stress_err = 0.0f64;
    for law in [Law::PowerLawA, Law::PowerLawB] {
        for mu in [1.0, 0.37] {
            let pp = PPotential::new(law, 2.0, 1.0, mu).map_err(|e| e.to_string())?;
            for _ in 0..10_000 {
                let scale = 10f64.powf(rng.random_range(-3.0..3.0));
                let b = SymTensor::from_fn(3, |_, _| scale * rng.random_range(-1.0..1.0));
                stress_err = stress_err.max((pp.stress(&b) - b.scale(mu)).norm() / b.norm().max(f64::MIN_POSITIVE));
            }
        }
    }

    let grid = Grid::new(2, 1.0, 8, true).map_err(|e| e.to_string())?;
    let basis = solve_eigen(&grid, 16).map_err(|e| e.to_string())?;
    let pp = PPotential::new(Law::PowerLawB, 2.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let sys = GalerkinSystem::new(&basis, pp, None, None, false).map_err(|e| e.to_string())?;
    let u0 = FieldSpec::new(["2*x2*(1-x2)*(1-2*x2)*(1-x1^2)^2", "4*x1*x2^2*(1-x2)^2*(1-x1^2)"])
        .compile(2)
        .and_then(|f| f.sample(&grid, 0.0))
        .map_err(|e| e.to_string())?;
    let (c0, _) = project_initial(&sys, &u0).map_err(|e| e.to_string())?;
    let dt = 1e-2;
    let (_, coeffs, _) =
        simulate_from(&sys, c0.clone(), dt, 100, NewtonSettings::default()).map_err(|e| e.to_string())?;
    let lam = basis.lambdas();
    let mut decay_err = 0.0f64;
    for (n, c) in coeffs.iter().enumerate() {
        let exact = DVector::from_fn(c.len(), |k, _| c0[k] * (1.0 + dt * lam[k]).powi(-(n as i32)));
        decay_err = decay_err.max((c - &exact).norm() / exact.norm());
    }
    let passed = stress_err <= f64::EPSILON && decay_err <= 1e-10;
    Ok((passed, format!("stress rel err {stress_err:.1e}, closed-form rel err {decay_err:.1e}")))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("constitutive certification", Box::new(|| run(run_verify(&VerifyParams::default())))),
        ("newtonian degeneration", Box::new(newtonian)),
        ("korn ratio", Box::new(|| run(run_korn(&KornParams::default())))),
        ("stokes eigenbasis", Box::new(|| run(run_basis(&BasisParams::default())))),
        ("energy estimate", Box::new(|| run(run_energy_suite(&EnergySuiteParams::default())))),
        ("uniqueness contraction", Box::new(|| run(run_uniqueness(&UniquenessParams::default())))),
        ("reflection symmetry", Box::new(|| run(run_symmetry(&SymmetryParams::default())))),
        ("regularity diagnostics", Box::new(|| run(run_regularity(&RegularityParams::default())))),
        ("decay at infinity", Box::new(|| run(run_decay(&DecayParams::default())))),
    ];
    let start = Instant::now();
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= passed;
        println!("{} [{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" }, i + 1);
    }
    let total = start.elapsed().as_secs_f64();
    let in_budget = total <= 600.0;
    println!("{} total wall-clock {total:.1} s (budget 600 s)", if in_budget { "PASS" } else { "FAIL" });
    if all && in_budget {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
