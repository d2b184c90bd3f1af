//! Simulation configuration, read from JSON or TOML (flat dotted keys work).
//!
//! ```toml
//! modes = 16
//! t_final = 1.0
//! dt = 0.01
//! grid = { dim = 2, radius = 1.0, cells = 12 }
//! potential = { law = "power-b", p = 2.5, delta = 1.0, mu = 1.0 }
//! u0 = ["sin(pi*x1)*x2", "0"]
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::PPotential;
use crate::domain::Grid;
use crate::expr::{ExprError, ExprField, FieldSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: Grid,
    pub potential: PPotential,
    pub modes: usize,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub u0: FieldSpec,
    #[serde(default)]
    pub f: FieldSpec,
    #[serde(default)]
    pub v: FieldSpec,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    /// Lag the transport field to the previous iterate instead of using `v`.
    #[serde(default)]
    pub picard: bool,
}

/// Parses any deserializable document, JSON when it starts with `{`, TOML
/// otherwise.
pub fn parse_document<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let parsed = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(ConfigError::Parse)
}

pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    parse_document(&std::fs::read_to_string(path)?)
}

/// Compiled field expressions of a configuration.
#[derive(Debug, Clone)]
pub struct CompiledFields {
    pub u0: ExprField,
    pub f: ExprField,
    pub v: ExprField,
}

impl SimConfig {
    /// Minimal configuration with zero data.
    pub fn new(grid: Grid, potential: PPotential, modes: usize, t_final: f64, dt: f64) -> Self {
        SimConfig {
            grid,
            potential,
            modes,
            t_final,
            dt,
            u0: FieldSpec::default(),
            f: FieldSpec::default(),
            v: FieldSpec::default(),
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            seed: 0,
            picard: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: SimConfig = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let c: SimConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads JSON when the file starts with `{`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let c: SimConfig = load_document(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= self.dt) {
            return bad(format!("t_final = {} must be at least dt", self.t_final));
        }
        if self.modes == 0 {
            return bad("modes must be at least 1".into());
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("newton_tol and newton_max_iter must be positive".into());
        }
        self.compile()?;
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledFields, ConfigError> {
        let d = self.grid.dim();
        Ok(CompiledFields { u0: self.u0.compile(d)?, f: self.f.compile(d)?, v: self.v.compile(d)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
modes = 4
t_final = 0.1
dt = 0.01
grid.dim = 2
grid.radius = 1.0
grid.cells = 6
potential.law = "power-a"
potential.p = 1.9
u0 = ["sin(pi*x1)", "0"]
"#;

    #[test]
    fn parses_flat_toml_and_json() {
        let c = SimConfig::from_toml(TOML).unwrap();
        assert_eq!(c.grid.cells(), 6);
        assert!(c.grid.half_space());
        assert_eq!(c.potential.p(), 1.9);
        assert_eq!(c.newton_tol, 1e-12);
        assert_eq!(c.num_steps(), 10);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(SimConfig::from_json(&j).unwrap(), c);
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(SimConfig::from_toml(&TOML.replace("dt = 0.01", "dt = 0")), Err(ConfigError::Invalid(_))));
        assert!(matches!(SimConfig::from_toml(&TOML.replace("modes = 4", "modes = 0")), Err(ConfigError::Invalid(_))));
        assert!(matches!(SimConfig::from_toml(&TOML.replace("\"0\"]", "\"0\", \"1\"]")), Err(ConfigError::Expr(_))));
        assert!(matches!(SimConfig::from_toml("modes = "), Err(ConfigError::Parse(_))));
        assert!(matches!(SimConfig::from_toml(&format!("{TOML}\nbogus = 1")), Err(ConfigError::Parse(_))));
    }
}
