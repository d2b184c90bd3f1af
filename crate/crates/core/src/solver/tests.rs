use super::*;
use crate::constitutive::{Law, PPotential};
use crate::domain::Grid;
use crate::expr::FieldSpec;

fn basis(cells: usize, m: usize) -> StokesBasis {
    solve_eigen(&Grid::new(2, 1.0, cells, true).unwrap(), m).unwrap()
}

fn newtonian() -> PPotential {
    PPotential::new(Law::PowerLawB, 2.0, 0.0, 1.0).unwrap()
}

#[test]
fn rest_is_a_fixed_point() {
    let b = basis(4, 5);
    let cfg = SimConfig::new(b.grid().clone(), PPotential::new(Law::PowerLawA, 1.9, 1.0, 1.0).unwrap(), 5, 0.05, 0.01);
    let out = simulate_with_basis(&cfg, &b).unwrap();
    assert_eq!(out.ledger.rows.len(), 5);
    assert!(out.coeffs.iter().all(|c| c.iter().all(|x| *x == 0.0)));
    assert!(out.ledger.rows.iter().all(|r| r.energy == 0.0 && r.slack == 0.0 && r.newton_iterations == 0));
    assert_eq!(out.summary.empirical_constant, 0.0);
}

#[test]
fn newtonian_rhs_is_minus_lambda_c() {
    let b = basis(4, 6);
    let sys = GalerkinSystem::new(&b, newtonian(), None, None, false).unwrap();
    let c = DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin());
    let r = sys.rhs(&c, 0.0).unwrap();
    for k in 0..6 {
        let expect = -b.mode(k).lambda * c[k];
        assert!((r[k] - expect).abs() <= 1e-10 * expect.abs().max(1.0), "{k}: {} vs {expect}", r[k]);
    }
}

#[test]
fn single_mode_matches_closed_form() {
    let b = basis(4, 4);
    let sys = GalerkinSystem::new(&b, newtonian(), None, None, false).unwrap();
    let mut c0 = DVector::zeros(4);
    c0[2] = 0.7;
    let dt = 0.01;
    let (_, coeffs, ledger) = simulate_from(&sys, c0.clone(), dt, 50, NewtonSettings::default()).unwrap();
    for (n, c) in coeffs.iter().enumerate() {
        let exact = &c0 / (1.0 + dt * b.mode(2).lambda).powi(n as i32);
        assert!((c - &exact).norm() <= 1e-10 * exact.norm());
    }
    assert!(ledger.summarize(c0.norm_squared()).step_inequality_ok);
}

#[test]
fn unforced_energy_is_monotone_for_shear_thickening() {
    let b = basis(4, 6);
    let pp = PPotential::new(Law::PowerLawB, 2.5, 1.0, 1.0).unwrap();
    let sys = GalerkinSystem::new(&b, pp, None, None, false).unwrap();
    let c0 = DVector::from_fn(6, |i, _| 1.0 / (i as f64 + 1.0));
    let (_, _, ledger) = simulate_from(&sys, c0.clone(), 0.01, 30, NewtonSettings::default()).unwrap();
    let s = ledger.summarize(c0.norm_squared());
    assert!(s.monotone_energy && s.step_inequality_ok && s.bound_ok, "{s:?}");
    assert!(s.max_newton_iterations > 1);
}

#[test]
fn skew_transport_does_no_work() {
    let b = basis(6, 8);
    // Stream function vanishing to second order on the plane.
    let v =
        FieldSpec::new(["(2*x2 - 2*x2^3) * exp(-x1^2 - x2^2)", "2*x1*x2^2 * exp(-x1^2 - x2^2)"]).compile(2).unwrap();
    let sys = GalerkinSystem::new(&b, newtonian(), None, Some(&v), false).unwrap();
    let c = DVector::from_fn(8, |i, _| (0.3 * i as f64).cos());
    let (ts, raw) = sys.transport(0.0, &c).unwrap().unwrap();
    assert!(c.dot(&(&ts * &c)).abs() < 1e-13 * c.norm_squared());
    assert!(raw.norm() > 0.0);
    let (_, _, ledger) = simulate_from(&sys, c.clone(), 0.01, 20, NewtonSettings::default()).unwrap();
    let s = ledger.summarize(c.norm_squared());
    assert!(s.transport_ok && s.monotone_energy && s.step_inequality_ok, "{s:?}");
}

#[test]
fn non_solenoidal_transport_is_rejected() {
    let b = basis(4, 3);
    let v = FieldSpec::new(["x1", "0"]).compile(2).unwrap();
    assert!(matches!(GalerkinSystem::new(&b, newtonian(), None, Some(&v), false), Err(SolverError::BadTransport(_))));
}

#[test]
fn projection_error_shrinks_with_more_modes() {
    let grid = Grid::new(2, 1.0, 4, true).unwrap();
    let full = solve_eigen(&grid, 18).unwrap();
    let u0 = FieldSpec::new(["x2*(1-x2)*(1-x1^2)^2", "0"]).compile(2).unwrap().sample(&grid, 0.0).unwrap();
    let mut prev = f64::INFINITY;
    for m in [2, 5, 10, 18] {
        let mut b = full.clone();
        b.truncate(m);
        let sys = GalerkinSystem::new(&b, newtonian(), None, None, false).unwrap();
        let (_, err) = project_initial(&sys, &u0).unwrap();
        assert!(err <= prev + 1e-14, "m = {m}: {err} > {prev}");
        prev = err;
    }
}

#[test]
fn forced_run_keeps_the_ledger_balanced() {
    let grid = Grid::new(2, 1.0, 4, true).unwrap();
    let mut cfg = SimConfig::new(grid, PPotential::new(Law::PowerLawA, 1.9, 1.0, 1.0).unwrap(), 6, 0.1, 0.01);
    cfg.u0 = FieldSpec::new(["sin(pi*x1)*x2", "0"]);
    cfg.f = FieldSpec::new(["cos(t)", "x1"]);
    let (_, out) = simulate(&cfg).unwrap();
    assert!(out.summary.step_inequality_ok, "{:?}", out.summary);
    assert!(out.data_size > 0.0 && out.summary.empirical_constant.is_finite());
    assert_eq!(out.times.len(), 11);
}
