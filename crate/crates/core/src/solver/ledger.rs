use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Largest allowed upward violation of the per-step energy inequality.
pub const STEP_SLACK_TOL: f64 = 1e-9;
/// Transport contribution allowed per unit energy.
pub const TRANSPORT_TOL: f64 = 1e-10;
/// Constant in the a-priori bound `sup‖u‖² + ∫(S(Du),Du) ≤ C·M`.
pub const BOUND_CONSTANT: f64 = 2.0;

/// One time step of the energy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    /// `‖u_m‖²` after the step.
    pub energy: f64,
    /// `dt·(S(D u_m), D u_m)`.
    pub dissipation: f64,
    /// `dt·(f, u_m)`.
    pub work: f64,
    /// `dt·(V ⊗ u_m, ∇u_m)` with the skew form used by the scheme.
    pub transport: f64,
    /// Same with the literal, unsymmetrized pairing.
    pub transport_literal: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    /// `‖u^{n+1}‖² − ‖u^n‖² + 2 dt (S,D) − 2 dt (f,u)`; must not be positive.
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial_energy: f64,
    pub rows: Vec<LedgerRow>,
}

/// Verdicts derived from a ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub steps: usize,
    pub sup_energy: f64,
    pub dissipation_integral: f64,
    /// `sup‖u‖² + Σ dt (S,D)`.
    pub bound_lhs: f64,
    /// `M = ‖u₀‖² + ‖f‖^{p'}_{L^{p'}(Q_T)}`.
    pub data_size: f64,
    /// `bound_lhs / data_size` (zero when both vanish).
    pub empirical_constant: f64,
    pub bound_constant: f64,
    pub bound_ok: bool,
    pub max_slack: f64,
    pub step_inequality_ok: bool,
    /// `max |transport| / ‖u‖²` over steps.
    pub max_transport_ratio: f64,
    pub max_transport_literal: f64,
    pub transport_ok: bool,
    pub max_newton_iterations: usize,
    pub monotone_energy: bool,
}

impl EnergyLedger {
    pub fn summarize(&self, data_size: f64) -> EnergySummary {
        let sup_energy = self.rows.iter().map(|r| r.energy).fold(self.initial_energy, f64::max);
        let dissipation_integral: f64 = self.rows.iter().map(|r| r.dissipation).sum();
        let bound_lhs = sup_energy + dissipation_integral;
        let empirical_constant = if data_size > 0.0 {
            bound_lhs / data_size
        } else if bound_lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let max_slack = self.rows.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max);
        let max_transport_ratio = self
            .rows
            .iter()
            .map(|r| if r.transport == 0.0 { 0.0 } else { r.transport.abs() / r.energy.max(f64::MIN_POSITIVE) })
            .fold(0.0, f64::max);
        let mut prev = self.initial_energy;
        let mut monotone = true;
        for r in &self.rows {
            monotone &= r.energy <= prev;
            prev = r.energy;
        }
        EnergySummary {
            steps: self.rows.len(),
            sup_energy,
            dissipation_integral,
            bound_lhs,
            data_size,
            empirical_constant,
            bound_constant: BOUND_CONSTANT,
            bound_ok: bound_lhs <= BOUND_CONSTANT * data_size,
            max_slack,
            step_inequality_ok: max_slack <= STEP_SLACK_TOL,
            max_transport_ratio,
            max_transport_literal: self.rows.iter().map(|r| r.transport_literal.abs()).fold(0.0, f64::max),
            transport_ok: max_transport_ratio <= TRANSPORT_TOL,
            max_newton_iterations: self.rows.iter().map(|r| r.newton_iterations).max().unwrap_or(0),
            monotone_energy: monotone,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "step,t,energy,dissipation,work,transport,transport_literal,newton_iterations,newton_residual,slack\n",
        );
        writeln!(s, "0,0,{:e},0,0,0,0,0,0,0", self.initial_energy).expect("string write");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
                r.step,
                r.t,
                r.energy,
                r.dissipation,
                r.work,
                r.transport,
                r.transport_literal,
                r.newton_iterations,
                r.newton_residual,
                r.slack
            )
            .expect("string write");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: usize, energy: f64, slack: f64) -> LedgerRow {
        LedgerRow {
            step,
            t: step as f64,
            energy,
            dissipation: 0.1,
            work: 0.0,
            transport: 0.0,
            transport_literal: 0.0,
            newton_iterations: 2,
            newton_residual: 0.0,
            slack,
        }
    }

    #[test]
    fn summary_flags() {
        let l = EnergyLedger { initial_energy: 1.0, rows: vec![row(1, 0.8, -0.1), row(2, 0.7, 2e-9)] };
        let s = l.summarize(1.0);
        assert!(s.monotone_energy);
        assert!(!s.step_inequality_ok);
        assert!((s.bound_lhs - 1.2).abs() < 1e-15);
        assert!(s.bound_ok);
        assert_eq!(l.to_csv().lines().count(), 4);
        let rest = EnergyLedger { initial_energy: 0.0, rows: vec![LedgerRow { dissipation: 0.0, ..row(1, 0.0, 0.0) }] };
        assert_eq!(rest.summarize(0.0).empirical_constant, 0.0);
    }
}
