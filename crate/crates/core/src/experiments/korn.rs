use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{spread, ExperimentError, ExperimentReport, Table};
use crate::domain::{discrete_curl, korn_ratio, DomainError, Grid, VelocityField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KornParams {
    pub radius: f64,
    /// Cells per radius on the coarse grid; the refined grid doubles it.
    pub cells: usize,
    pub fields: usize,
    pub newtonian_tol: f64,
    pub exponents: Vec<f64>,
    pub refinement_tol: f64,
    pub seed: u64,
}

impl Default for KornParams {
    fn default() -> Self {
        KornParams {
            radius: 1.0,
            cells: 32,
            fields: 20,
            newtonian_tol: 0.01,
            exponents: vec![1.9, 2.5],
            refinement_tol: 0.10,
            seed: 0,
        }
    }
}

/// Sum of a few `(1 − s²)⁴` bumps, each supported at least two cells away
/// from every face (the plane included).
fn bump_potential(rng: &mut ChaCha8Rng, dim: usize, radius: f64, h: f64) -> Vec<([f64; 3], f64, f64)> {
    let n_bumps = rng.random_range(1..=3);
    (0..n_bumps)
        .map(|_| {
            let r = radius * rng.random_range(0.1..0.22);
            let mut c = [0.0; 3];
            for (a, ca) in c.iter_mut().enumerate().take(dim) {
                let lo = if a == dim - 1 { 0.0 } else { -radius };
                *ca = rng.random_range(lo + r + 2.0 * h..radius - r - 2.0 * h);
            }
            (c, r, rng.random_range(-1.0..1.0))
        })
        .collect()
}

fn eval_bumps(bumps: &[([f64; 3], f64, f64)], x: &[f64]) -> f64 {
    bumps
        .iter()
        .map(|(c, r, a)| {
            let s2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci).powi(2)).sum::<f64>() / (r * r);
            if s2 < 1.0 {
                a * (1.0 - s2).powi(4)
            } else {
                0.0
            }
        })
        .sum()
}

/// Discrete curl of a random compactly supported potential. The continuous
/// potential depends only on `(seed, dim, radius)` and the minimal spacing
/// `h_min`, so the same seed gives the same field on refined grids.
pub fn random_compact_divfree(grid: &Grid, seed: u64, h_min: f64) -> Result<VelocityField, DomainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let ncomp = if d == 2 { 1 } else { 3 };
    let pots: Vec<Vec<f64>> = (0..ncomp)
        .map(|_| {
            let bumps = bump_potential(&mut rng, d, grid.radius(), h_min.max(grid.h()));
            (0..grid.num_nodes()).map(|n| eval_bumps(&bumps, &grid.coords(n)[..d])).collect()
        })
        .collect();
    discrete_curl(grid, &pots)
}

/// `‖∇u‖_p / ‖D u‖_p` over random compactly supported solenoidal fields.
pub fn run_korn(params: &KornParams) -> Result<ExperimentReport, ExperimentError> {
    let mut report = ExperimentReport::new("korn", params);
    report.truncation_radius = Some(params.radius);
    let coarse = Grid::new(2, params.radius, params.cells, true)?;
    let fine = coarse.refined();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut header = vec!["field".to_string(), "p2".to_string()];
    for p in &params.exponents {
        header.push(format!("p{p}_coarse"));
        header.push(format!("p{p}_fine"));
    }
    let mut table = Table { name: "ratios".into(), header, rows: Vec::new() };
    let mut worst_newtonian = 0.0f64;
    let mut worst_spread = vec![1.0f64; params.exponents.len()];
    for i in 0..params.fields {
        let seed = params.seed.wrapping_add(i as u64);
        report.seeds.push(seed);
        let uc = random_compact_divfree(&coarse, seed, coarse.h())?;
        let r2 = korn_ratio(&uc, 2.0)?;
        worst_newtonian = worst_newtonian.max((r2 - sqrt2).abs() / sqrt2);
        let uf = random_compact_divfree(&fine, seed, coarse.h())?;
        let mut row = vec![i as f64, r2];
        for (j, &p) in params.exponents.iter().enumerate() {
            let (rc, rf) = (korn_ratio(&uc, p)?, korn_ratio(&uf, p)?);
            worst_spread[j] =
                worst_spread[j].max(if rc.is_finite() && rf.is_finite() { spread(rc, rf) } else { f64::INFINITY });
            row.extend([rc, rf]);
        }
        table.push(row);
    }
    report.at_most("p2_relative_deviation_from_sqrt2", worst_newtonian, params.newtonian_tol);
    for (j, p) in params.exponents.iter().enumerate() {
        report.at_most(&format!("p{p}_refinement_change"), worst_spread[j] - 1.0, params.refinement_tol);
    }
    report.tables.push(table);
    Ok(report.finish())
}
