//! Analytic field specifications: arithmetic strings over `x1..xn` and `t`.
//!
//! Expressions are parsed with `evalexpr`. Bare integer literals are promoted
//! to floats before parsing so that `1/2` means one half. Available functions:
//! `sin cos tan exp ln sqrt abs tanh`, plus the constant `pi`.

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, Function,
    HashMapContext, Node, Value,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Grid, VelocityField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("cannot parse '{expr}': {msg}")]
    Parse { expr: String, msg: String },
    #[error("cannot evaluate '{expr}': {msg}")]
    Eval { expr: String, msg: String },
    #[error("field has {got} components, grid needs {want}")]
    Components { got: usize, want: usize },
}

/// One expression string per velocity component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct FieldSpec(pub Vec<String>);

impl FieldSpec {
    pub fn zero(dim: usize) -> Self {
        FieldSpec(vec!["0".to_string(); dim])
    }

    pub fn new<S: Into<String>>(components: impl IntoIterator<Item = S>) -> Self {
        FieldSpec(components.into_iter().map(Into::into).collect())
    }

    pub fn compile(&self, dim: usize) -> Result<ExprField, ExprError> {
        // an empty spec means the zero field
        if self.0.is_empty() {
            return FieldSpec::zero(dim).compile(dim);
        }
        if self.0.len() != dim {
            return Err(ExprError::Components { got: self.0.len(), want: dim });
        }
        let nodes = self
            .0
            .iter()
            .map(|s| {
                build_operator_tree::<DefaultNumericTypes>(&promote_integers(s))
                    .map_err(|e| ExprError::Parse { expr: s.clone(), msg: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let field = ExprField { source: self.0.clone(), nodes, dim };
        // probe once so unknown identifiers fail at load time
        field.eval(&[0.1, 0.2, 0.3], 0.0)?;
        Ok(field)
    }
}

/// Appends `.0` to integer literals that are not part of an identifier or a
/// float literal.
fn promote_integers(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev_ident = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_' || chars[i - 1] == '.');
        if c.is_ascii_digit() && !prev_ident {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.extend(&chars[start..i]);
            let next = chars.get(i).copied();
            if !matches!(next, Some('.') | Some('e') | Some('E')) {
                out.push_str(".0");
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

/// A compiled vector-valued expression.
#[derive(Debug, Clone)]
pub struct ExprField {
    source: Vec<String>,
    nodes: Vec<Node<DefaultNumericTypes>>,
    dim: usize,
}

fn math(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |v: &Value<DefaultNumericTypes>| Ok(Value::Float(f(v.as_number()?))))
}

fn base_context() -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let fns: [(&str, fn(f64) -> f64); 8] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("tanh", f64::tanh),
    ];
    for (name, f) in fns {
        ctx.set_function(name.into(), math(f)).expect("fresh context");
    }
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI)).expect("fresh context");
    ctx
}

impl ExprField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &[String] {
        &self.source
    }

    /// True if any component mentions `t`.
    pub fn depends_on_time(&self) -> bool {
        self.nodes.iter().any(|n| n.iter_variable_identifiers().any(|v| v == "t"))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.source.iter().all(|s| s.trim().parse::<f64>().map(|v| v == 0.0).unwrap_or(false))
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<[f64; 3], ExprError> {
        let mut ctx = base_context();
        self.eval_in(&mut ctx, x, t)
    }

    fn eval_in(&self, ctx: &mut HashMapContext<DefaultNumericTypes>, x: &[f64], t: f64) -> Result<[f64; 3], ExprError> {
        for (a, name) in ["x1", "x2", "x3"].iter().enumerate() {
            ctx.set_value((*name).into(), Value::Float(x.get(a).copied().unwrap_or(0.0))).expect("float variable");
        }
        ctx.set_value("t".into(), Value::Float(t)).expect("float variable");
        let mut out = [0.0; 3];
        for (c, node) in self.nodes.iter().enumerate() {
            out[c] = node
                .eval_number_with_context(ctx)
                .map_err(|e| ExprError::Eval { expr: self.source[c].clone(), msg: e.to_string() })?;
        }
        Ok(out)
    }

    /// Samples the field on every grid node at time `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<VelocityField, ExprError> {
        if self.dim != grid.dim() {
            return Err(ExprError::Components { got: self.dim, want: grid.dim() });
        }
        let mut ctx = base_context();
        let mut u = VelocityField::zeros(grid);
        for node in 0..grid.num_nodes() {
            let x = grid.coords(node);
            let v = self.eval_in(&mut ctx, &x[..grid.dim()], t)?;
            for (c, val) in v.iter().enumerate().take(grid.dim()) {
                u.set(c, node, *val);
            }
        }
        Ok(u)
    }

    /// Evaluates at arbitrary points (e.g. quadrature points).
    pub fn sample_points(&self, points: &[[f64; 3]], t: f64) -> Result<Vec<[f64; 3]>, ExprError> {
        let mut ctx = base_context();
        points.iter().map(|x| self.eval_in(&mut ctx, &x[..self.dim], t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_literals_become_floats() {
        assert_eq!(promote_integers("1/2"), "1.0/2.0");
        assert_eq!(promote_integers("x1 + 2.5e3*x2"), "x1 + 2.5e3*x2");
        assert_eq!(promote_integers("sin(3*x3)^2"), "sin(3.0*x3)^2.0");
        let f = FieldSpec::new(["1/2", "x1*x2"]).compile(2).unwrap();
        assert_eq!(f.eval(&[2.0, 3.0], 0.0).unwrap()[..2], [0.5, 6.0]);
    }

    #[test]
    fn functions_and_time() {
        let f = FieldSpec::new(["sin(pi*x1)*exp(-t)", "cos(x2)", "sqrt(abs(x3))"]).compile(3).unwrap();
        let v = f.eval(&[0.5, 0.0, -4.0], 0.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(v[1], 1.0);
        assert_eq!(v[2], 2.0);
        assert!(f.depends_on_time());
        assert!(!FieldSpec::zero(2).compile(2).unwrap().depends_on_time());
        assert!(FieldSpec::zero(2).compile(2).unwrap().is_identically_zero());
    }

    #[test]
    fn errors_reported() {
        assert!(matches!(FieldSpec::new(["(x1"]).compile(1), Err(ExprError::Parse { .. })));
        assert!(matches!(FieldSpec::new(["y"]).compile(1), Err(ExprError::Eval { .. })));
        assert!(matches!(FieldSpec::new(["0"]).compile(2), Err(ExprError::Components { .. })));
    }
}
