//! Experiment drivers. Each returns an [`ExperimentReport`] whose verdict is
//! the conjunction of explicit threshold checks.

mod basis;
mod constitutive;
mod decay;
mod energy;
mod korn;
mod regularity;
mod symmetry;
mod uniqueness;

pub use basis::{run_basis, BasisParams};
pub use constitutive::{run_verify, VerifyParams};
pub use decay::{run_decay, DecayParams};
pub use energy::{run_energy_suite, run_simulation, EnergySuiteParams};
pub use korn::{random_compact_divfree, run_korn, KornParams};
pub use regularity::{run_regularity, RegularityParams};
pub use symmetry::{run_symmetry, SymmetryParams};
pub use uniqueness::{run_uniqueness, UniquenessParams};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigError;
use crate::constitutive::ConstitutiveError;
use crate::domain::DomainError;
use crate::expr::ExprError;
use crate::solver::SolverError;
use crate::stokes_basis::StokesError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ threshold`
    AtMost,
    /// `value ≥ threshold`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

/// Per-step or per-sample data written as CSV next to the JSON summary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub seeds: Vec<u64>,
    pub runtime_seconds: f64,
    /// Radius of the truncated domain, when one is involved.
    pub truncation_radius: Option<f64>,
    /// Free-form measurements that carry no verdict.
    pub measurements: serde_json::Map<String, serde_json::Value>,
    pub passed: bool,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl ExperimentReport {
    pub fn new(id: &str, config: impl Serialize) -> Self {
        ExperimentReport {
            id: id.into(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            checks: Vec::new(),
            seeds: Vec::new(),
            runtime_seconds: 0.0,
            truncation_radius: None,
            measurements: serde_json::Map::new(),
            passed: true,
            tables: Vec::new(),
            started: Some(Instant::now()),
        }
    }

    fn push(&mut self, name: &str, value: f64, threshold: f64, relation: Relation) -> bool {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        };
        self.checks.push(Check { name: name.into(), value, threshold, relation, passed });
        self.passed &= passed;
        passed
    }

    /// Records `value ≤ threshold` (NaN fails).
    pub fn at_most(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        self.push(name, value, threshold, Relation::AtMost)
    }

    /// Records `value ≥ threshold` (NaN fails).
    pub fn at_least(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        self.push(name, value, threshold, Relation::AtLeast)
    }

    /// Records a boolean as `1 ≥ 1` or `0 ≥ 1`.
    pub fn holds(&mut self, name: &str, ok: bool) -> bool {
        self.push(name, if ok { 1.0 } else { 0.0 }, 1.0, Relation::AtLeast)
    }

    pub fn measure(&mut self, key: &str, value: impl Serialize) {
        self.measurements.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    /// Folds another report's checks in, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: ExperimentReport) {
        for c in other.checks {
            self.push(&format!("{prefix}{}", c.name), c.value, c.threshold, c.relation);
        }
        for (k, v) in other.measurements {
            self.measurements.insert(format!("{prefix}{k}"), v);
        }
        for mut t in other.tables {
            t.name = format!("{prefix}{}", t.name);
            self.tables.push(t);
        }
        self.seeds.extend(other.seeds);
    }

    pub fn finish(mut self) -> Self {
        if let Some(t0) = self.started.take() {
            self.runtime_seconds = t0.elapsed().as_secs_f64();
        }
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("name,value,threshold,relation,passed\n");
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            writeln!(s, "{},{:e},{:e},{},{}", c.name, c.value, c.threshold, rel, c.passed).expect("string write");
        }
        s
    }

    /// Writes `<id>.json`, `<id>_checks.csv` and one CSV per table; returns
    /// the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let json = dir.join(format!("{}.json", self.id));
        std::fs::write(&json, serde_json::to_string_pretty(self).expect("report serializes"))?;
        paths.push(json);
        let checks = dir.join(format!("{}_checks.csv", self.id));
        std::fs::write(&checks, self.checks_csv())?;
        paths.push(checks);
        for t in &self.tables {
            let p = dir.join(format!("{}_{}.csv", self.id, t.name));
            std::fs::write(&p, t.to_csv())?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// `max(a/b, b/a)`; infinite when either side is zero or not finite.
pub(crate) fn spread(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        (a / b).max(b / a)
    } else if a == b {
        1.0
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_conjunction_and_files_are_written() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({"k": 1}));
        assert!(r.at_most("small", 1e-12, 1e-10));
        assert!(!r.at_least("nan", f64::NAN, 0.0));
        let mut t = Table::new("steps", &["t", "e"]);
        t.push(vec![0.0, 1.0]);
        r.tables.push(t);
        let r = r.finish();
        assert!(!r.passed);
        assert_eq!(r.failed_checks().len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let paths = r.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert_eq!(v["passed"], false);
        assert_eq!(v["checks"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn spread_is_symmetric() {
        assert_eq!(spread(2.0, 1.0), 2.0);
        assert_eq!(spread(1.0, 2.0), 2.0);
        assert_eq!(spread(0.0, 0.0), 1.0);
        assert!(spread(0.0, 1.0).is_infinite());
    }
}
