//! Galerkin time stepping in a Stokes eigenbasis: implicit Euler with Newton
//! iterations and a per-step energy ledger.

mod ledger;
mod system;

pub use ledger::{EnergyLedger, EnergySummary, LedgerRow, BOUND_CONSTANT, STEP_SLACK_TOL, TRANSPORT_TOL};
pub use system::{GalerkinSystem, StressEval, TRANSPORT_SOLENOIDAL_TOL};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::constitutive::ConstitutiveError;
use crate::domain::{DomainError, VelocityField};
use crate::expr::{ExprError, ExprField};
use crate::stokes_basis::{solve_eigen, StokesBasis, StokesError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("Newton failed at t = {t} after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { t: f64, iterations: usize, residual: f64 },
    #[error("transport field rejected: {0}")]
    BadTransport(String),
    #[error("field and basis live on different grids")]
    GridMismatch,
    #[error("singular Newton matrix at t = {t}")]
    Singular { t: f64 },
}

/// Newton stopping rule: `‖G(c)‖ ≤ tol·(1 + ‖c_n‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-12, max_iter: 50 }
    }
}

/// Nodal-mass projection of `u0` onto the basis; returns the coefficients
/// and the absolute reconstruction error `‖u0 − Σ c_k a_k‖`.
pub fn project_initial(sys: &GalerkinSystem<'_>, u0: &VelocityField) -> Result<(DVector<f64>, f64), SolverError> {
    if u0.grid() != sys.basis().grid() {
        return Err(SolverError::GridMismatch);
    }
    let c = sys.load_vector(u0);
    let err = u0.sub(&sys.reconstruct(&c)).norm_l2();
    Ok((c, err))
}

/// One implicit Euler step from `(t_n, c_n)` to `t_n + dt`.
pub fn step_implicit_euler(
    sys: &GalerkinSystem<'_>,
    c_n: &DVector<f64>,
    t_n: f64,
    dt: f64,
    step: usize,
    newton: NewtonSettings,
) -> Result<(DVector<f64>, LedgerRow), SolverError> {
    let t = t_n + dt;
    let f = sys.forcing(t)?;
    // Lagged transport freezes the advecting field at the start of the step.
    let transport = sys.transport(t, c_n)?;
    let m = sys.len();

    let residual = |c: &DVector<f64>| -> Result<DVector<f64>, SolverError> {
        let mut r = &f - sys.stress(c, t)?.force;
        if let Some((ts, _)) = &transport {
            r += ts * c;
        }
        Ok(c - c_n - r * dt)
    };

    let target = newton.tol * (1.0 + c_n.norm());
    let mut c = c_n.clone();
    let mut g = residual(&c)?;
    let mut gnorm = g.norm();
    let mut iterations = 0;
    while gnorm > target {
        if iterations == newton.max_iter {
            return Err(SolverError::NewtonFailed { t, iterations, residual: gnorm });
        }
        iterations += 1;
        let mut jac = sys.stress_jacobian(&c)?;
        if let Some((ts, _)) = &transport {
            jac -= ts;
        }
        jac *= dt;
        jac += DMatrix::<f64>::identity(m, m);
        let delta = jac.lu().solve(&(-&g)).ok_or(SolverError::Singular { t })?;

        let mut alpha = 1.0;
        loop {
            let trial = &c + &delta * alpha;
            let gt = residual(&trial)?;
            let gtn = gt.norm();
            if gtn <= (1.0 - 1e-4 * alpha) * gnorm || alpha < 1e-10 {
                c = trial;
                g = gt;
                gnorm = gtn;
                break;
            }
            alpha *= 0.5;
        }
        if !gnorm.is_finite() {
            return Err(SolverError::NonFinite { t });
        }
    }

    let energy = c.norm_squared();
    let dissipation = dt * sys.stress(&c, t)?.dissipation;
    let work = dt * f.dot(&c);
    let (transport_skew, transport_literal) = match &transport {
        Some((ts, raw)) => (dt * c.dot(&(ts * &c)), dt * c.dot(&(raw * &c))),
        None => (0.0, 0.0),
    };
    let row = LedgerRow {
        step,
        t,
        energy,
        dissipation,
        work,
        transport: transport_skew,
        transport_literal,
        newton_iterations: iterations,
        newton_residual: gnorm,
        slack: energy - c_n.norm_squared() + 2.0 * dissipation - 2.0 * work,
    };
    Ok((c, row))
}

/// Trajectory and energy verdicts of a run.
#[derive(Debug, Clone, Serialize)]
pub struct SimOutcome {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub coeffs: Vec<DVector<f64>>,
    pub ledger: EnergyLedger,
    pub summary: EnergySummary,
    /// `‖u₀‖² + Σ dt ∫|f(t_n)|^{p'}`.
    pub data_size: f64,
    /// `‖u₀ − P_m u₀‖`.
    pub projection_error: f64,
}

impl SimOutcome {
    pub fn final_coeffs(&self) -> &DVector<f64> {
        self.coeffs.last().expect("trajectory is never empty")
    }
}

/// Advances `c0` through `steps` implicit Euler steps of size `dt`.
pub fn simulate_from(
    sys: &GalerkinSystem<'_>,
    c0: DVector<f64>,
    dt: f64,
    steps: usize,
    newton: NewtonSettings,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, EnergyLedger), SolverError> {
    let mut ledger = EnergyLedger { initial_energy: c0.norm_squared(), rows: Vec::with_capacity(steps) };
    let mut times = vec![0.0];
    let mut coeffs = vec![c0];
    for n in 0..steps {
        let t_n = n as f64 * dt;
        let (c, row) = step_implicit_euler(sys, coeffs.last().expect("nonempty"), t_n, dt, n + 1, newton)?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(SolverError::NonFinite { t: row.t });
        }
        times.push(row.t);
        coeffs.push(c);
        ledger.rows.push(row);
    }
    Ok((times, coeffs, ledger))
}

/// `Σ_n dt ∫|f(t_n)|^{p'}` over `n = 1..=steps`, nodal rule.
pub fn forcing_size(f: &ExprField, sys: &GalerkinSystem<'_>, dt: f64, steps: usize) -> Result<f64, SolverError> {
    if f.is_identically_zero() {
        return Ok(0.0);
    }
    let grid = sys.basis().grid();
    let pc = sys.potential().p_conjugate();
    let w = grid.weights();
    let integral = |t: f64| -> Result<f64, SolverError> {
        let mag = f.sample(grid, t)?.magnitude();
        Ok(mag.iter().zip(&w).map(|(m, w)| w * m.powf(pc)).sum())
    };
    if !f.depends_on_time() {
        return Ok(steps as f64 * dt * integral(0.0)?);
    }
    let mut total = 0.0;
    for n in 1..=steps {
        total += dt * integral(n as f64 * dt)?;
    }
    Ok(total)
}

/// Runs `cfg` in a precomputed basis (truncated to `cfg.modes` if larger).
pub fn simulate_with_basis(cfg: &SimConfig, basis: &StokesBasis) -> Result<SimOutcome, SolverError> {
    cfg.validate()?;
    if cfg.grid != *basis.grid() {
        return Err(SolverError::GridMismatch);
    }
    let fields = cfg.compile()?;
    let sys = GalerkinSystem::new(basis, cfg.potential, Some(&fields.f), Some(&fields.v), cfg.picard)?;
    let u0 = fields.u0.sample(basis.grid(), 0.0)?;
    let (c0, projection_error) = project_initial(&sys, &u0)?;
    let steps = cfg.num_steps();
    let newton = NewtonSettings { tol: cfg.newton_tol, max_iter: cfg.newton_max_iter };
    let (times, coeffs, ledger) = simulate_from(&sys, c0, cfg.dt, steps, newton)?;
    let data_size = u0.norm_l2().powi(2) + forcing_size(&fields.f, &sys, cfg.dt, steps)?;
    let summary = ledger.summarize(data_size);
    Ok(SimOutcome { times, coeffs, ledger, summary, data_size, projection_error })
}

/// Builds the first `cfg.modes` eigenmodes and runs `cfg`.
pub fn simulate(cfg: &SimConfig) -> Result<(StokesBasis, SimOutcome), SolverError> {
    cfg.validate()?;
    let basis = solve_eigen(&cfg.grid, cfg.modes)?;
    let out = simulate_with_basis(cfg, &basis)?;
    Ok((basis, out))
}

#[cfg(test)]
mod tests;
