use serde::{Deserialize, Serialize};

use super::{ExperimentError, ExperimentReport, Table};
use crate::constitutive::{Law, PPotential};
use crate::domain::{shell_maxima, Admissibility, Grid};
use crate::expr::FieldSpec;
use crate::solver::{project_initial, simulate_from, GalerkinSystem, NewtonSettings};
use crate::stokes_basis::{divfree_subspace, StokesBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    pub dim: usize,
    /// Truncation radii, run at the same spacing `h`.
    pub radii: Vec<f64>,
    pub h: f64,
    /// Radius of the compact data around the origin.
    pub support: f64,
    pub law: Law,
    pub p: f64,
    pub delta: f64,
    pub mu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub forcing_amplitude: f64,
    pub tail_tol: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            dim: 2,
            radii: vec![1.0, 2.0],
            h: 0.0625,
            support: 0.25,
            law: Law::PowerLawB,
            p: 2.0,
            delta: 1.0,
            mu: 1.0,
            dt: 1e-3,
            t_final: 1e-2,
            forcing_amplitude: 1.0,
            tail_tol: 1e-3,
        }
    }
}

/// Curl of `x₂ max(0, 1 − |x|²/a²)⁴`: compact, solenoidal and compatible
/// with the slip conditions on the plane.
pub(crate) fn compact_vortex(a: f64, amplitude: f64) -> FieldSpec {
    let a2 = a * a;
    let s = format!("(x1^2+x2^2)/{a2}");
    let q = format!("(((1-{s}) + abs(1-{s}))/2)");
    let k = 8.0 / a2;
    FieldSpec::new([format!("{amplitude}*({q}^4 - {k}*x2^2*{q}^3)"), format!("{amplitude}*{k}*x1*x2*{q}^3")])
}

/// Shell maxima of the final state for one truncation radius.
fn final_shells(params: &DecayParams, radius: f64) -> Result<(Vec<f64>, usize), ExperimentError> {
    let cells = (radius / params.h).round() as usize;
    let grid = Grid::new(params.dim, radius, cells, true)?;
    let sub = divfree_subspace(&grid, Admissibility::SlipNoSlip)?;
    let basis = StokesBasis::from_subspace(&sub, sub.dim(), false)?;
    let pp = PPotential::new(params.law, params.p, params.delta, params.mu)?;
    let d = params.dim;
    let u0 = compact_vortex(params.support, 1.0).compile(d)?.sample(&grid, 0.0)?;
    let f = compact_vortex(params.support, params.forcing_amplitude).compile(d)?;
    let sys = GalerkinSystem::new(&basis, pp, Some(&f), None, false)?;
    let (c0, _) = project_initial(&sys, &u0)?;
    let steps = (params.t_final / params.dt).round() as usize;
    let (_, coeffs, _) = simulate_from(&sys, c0, params.dt, steps, NewtonSettings::default())?;
    let u = sys.reconstruct(coeffs.last().expect("nonempty"));
    Ok((shell_maxima(&u), basis.len()))
}

/// Index of the largest entry and whether the sequence decreases strictly
/// from there on.
pub(crate) fn decreasing_from_peak(m: &[f64]) -> (usize, bool) {
    let peak = m.iter().enumerate().fold(0, |best, (i, v)| if *v > m[best] { i } else { best });
    (peak, m[peak..].windows(2).all(|w| w[1] < w[0]))
}

/// Compactly supported data, shell maxima at the final time for each radius.
pub fn run_decay(params: &DecayParams) -> Result<ExperimentReport, ExperimentError> {
    if params.radii.is_empty() || params.radii.iter().any(|r| params.support > 0.5 * r) {
        return Err(ExperimentError::Invalid("data must sit inside the inner half of every box".into()));
    }
    let mut report = ExperimentReport::new("decay", params);
    report.truncation_radius = params.radii.iter().cloned().reduce(f64::max);
    let mut header = vec!["radius".to_string(), "modes".to_string()];
    header.extend((0..8).map(|i| format!("shell{i}")));
    let mut table = Table { name: "shells".into(), header, rows: Vec::new() };
    let mut tails = Vec::new();
    for &r in &params.radii {
        let (shells, modes) = final_shells(params, r)?;
        let (peak, decreasing) = decreasing_from_peak(&shells);
        let tail = shells.last().copied().unwrap_or(0.0) / shells[peak].max(f64::MIN_POSITIVE);
        report.holds(&format!("r{r}_strictly_decreasing_outward"), decreasing);
        report.at_most(&format!("r{r}_outer_over_peak"), tail, params.tail_tol);
        tails.push(tail);
        let mut row = vec![r, modes as f64];
        row.extend(&shells);
        table.push(row);
    }
    for w in tails.windows(2) {
        report.at_most("tail_ratio_larger_radius", w[1] / w[0].max(f64::MIN_POSITIVE), 1.0 - 1e-12);
    }
    report.tables.push(table);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_is_compact_and_tangential() {
        let g = Grid::new(2, 1.0, 8, true).unwrap();
        let u = compact_vortex(0.25, 1.0).compile(2).unwrap().sample(&g, 0.0).unwrap();
        for n in 0..g.num_nodes() {
            let x = g.coords(n);
            if x[0].hypot(x[1]) >= 0.25 || x[1] == 0.0 {
                assert_eq!(u.get(1, n), 0.0);
            }
        }
        assert!(u.max_abs() > 0.5);
    }

    #[test]
    fn peak_detection() {
        assert_eq!(decreasing_from_peak(&[0.5, 1.0, 0.2, 0.1]), (1, true));
        assert_eq!(decreasing_from_peak(&[1.0, 0.2, 0.2]), (0, false));
    }

    #[test]
    fn support_must_fit() {
        let p = DecayParams { support: 0.6, ..Default::default() };
        assert!(matches!(run_decay(&p), Err(ExperimentError::Invalid(_))));
    }
}
