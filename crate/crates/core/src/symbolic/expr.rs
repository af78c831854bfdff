//! Expression trees over sums, products, integer powers and affine-wrapped
//! unary candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::library::Candidate;
use crate::error::{Error, Result};
use crate::kan::ActivationEdge;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum SymbolicExpr {
    Const {
        value: f64,
    },
    Var {
        name: String,
    },
    Sum {
        terms: Vec<SymbolicExpr>,
    },
    Product {
        factors: Vec<SymbolicExpr>,
    },
    Pow {
        base: Box<SymbolicExpr>,
        exp: u32,
    },
    /// `c * g(a * arg + b) + d`.
    Unary {
        func: Candidate,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        arg: Box<SymbolicExpr>,
    },
    /// Activation that could not be matched to a candidate; evaluated with
    /// the original spline.
    Spline {
        label: String,
        edge: Box<ActivationEdge>,
        arg: Box<SymbolicExpr>,
    },
}

/// Version tag of the JSON document written by [`to_json`].
pub const EXPR_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    version: u32,
    expr: SymbolicExpr,
}

impl SymbolicExpr {
    pub fn constant(value: f64) -> Self {
        SymbolicExpr::Const { value }
    }

    pub fn var(name: impl Into<String>) -> Self {
        SymbolicExpr::Var { name: name.into() }
    }

    pub fn sum(terms: Vec<SymbolicExpr>) -> Self {
        SymbolicExpr::Sum { terms }
    }

    pub fn product(factors: Vec<SymbolicExpr>) -> Self {
        SymbolicExpr::Product { factors }
    }

    pub fn pow(base: SymbolicExpr, exp: u32) -> Self {
        SymbolicExpr::Pow {
            base: Box::new(base),
            exp,
        }
    }

    pub fn unary(func: Candidate, a: f64, b: f64, c: f64, d: f64, arg: SymbolicExpr) -> Self {
        SymbolicExpr::Unary {
            func,
            a,
            b,
            c,
            d,
            arg: Box::new(arg),
        }
    }

    /// Distinct variable names, sorted.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let SymbolicExpr::Var { name } = e {
                out.push(name.clone());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Number of unresolved spline markers.
    pub fn spline_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, SymbolicExpr::Spline { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Whether any node uses `func`.
    pub fn contains(&self, func: Candidate) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let SymbolicExpr::Unary { func: f, .. } = e {
                found |= *f == func;
            }
        });
        found
    }

    fn visit(&self, f: &mut impl FnMut(&SymbolicExpr)) {
        f(self);
        match self {
            SymbolicExpr::Const { .. } | SymbolicExpr::Var { .. } => {}
            SymbolicExpr::Sum { terms: xs } | SymbolicExpr::Product { factors: xs } => {
                xs.iter().for_each(|x| x.visit(f))
            }
            SymbolicExpr::Pow { base, .. } => base.visit(f),
            SymbolicExpr::Unary { arg, .. } | SymbolicExpr::Spline { arg, .. } => arg.visit(f),
        }
    }

    pub fn evaluate(&self, point: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            SymbolicExpr::Const { value } => Ok(*value),
            SymbolicExpr::Var { name } => point.get(name).copied().ok_or_else(|| Error::Domain {
                node: name.clone(),
                detail: "variable has no value".into(),
            }),
            SymbolicExpr::Sum { terms } => terms.iter().map(|t| t.evaluate(point)).sum(),
            SymbolicExpr::Product { factors } => factors.iter().map(|t| t.evaluate(point)).product(),
            SymbolicExpr::Pow { base, exp } => Ok(base.evaluate(point)?.powi(*exp as i32)),
            SymbolicExpr::Unary {
                func,
                a,
                b,
                c,
                d,
                arg,
            } => {
                let u = a * arg.evaluate(point)? + b;
                match func.eval(u) {
                    Some(g) => Ok(c * g + d),
                    None => Err(Error::Domain {
                        node: func.to_string(),
                        detail: format!("argument {u} outside the domain"),
                    }),
                }
            }
            SymbolicExpr::Spline { label, edge, arg } => {
                let v = edge.forward(arg.evaluate(point)?);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain {
                        node: label.clone(),
                        detail: "spline evaluated to a non-finite value".into(),
                    })
                }
            }
        }
    }

    /// Evaluates with variables given as `(name, value)` pairs.
    pub fn evaluate_at(&self, vars: &[(&str, f64)]) -> Result<f64> {
        let point = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.evaluate(&point)
    }
}

/// Versioned JSON document.
pub fn to_json(expr: &SymbolicExpr) -> String {
    serde_json::to_string_pretty(&Document {
        version: EXPR_FORMAT_VERSION,
        expr: expr.clone(),
    })
    .expect("expression trees serialize")
}

pub fn from_json(text: &str) -> Result<SymbolicExpr> {
    let doc: Document = serde_json::from_str(text).map_err(|e| {
        Error::parse("<expression>", e.line() as u64, e.to_string())
    })?;
    if doc.version != EXPR_FORMAT_VERSION {
        return Err(Error::parse(
            "<expression>",
            1,
            format!("unsupported expression version {}", doc.version),
        ));
    }
    Ok(doc.expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_polynomial() {
        let e = SymbolicExpr::sum(vec![
            SymbolicExpr::pow(SymbolicExpr::var("x"), 2),
            SymbolicExpr::constant(1.0),
        ]);
        assert_eq!(e.evaluate_at(&[("x", 2.0)]).unwrap(), 5.0);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let e = SymbolicExpr::unary(Candidate::Log, 1.0, 0.0, 1.0, 0.0, SymbolicExpr::var("V"));
        match e.evaluate_at(&[("V", -1.0)]) {
            Err(Error::Domain { node, .. }) => assert_eq!(node, "log"),
            other => panic!("{other:?}"),
        }
        let r = SymbolicExpr::unary(Candidate::Reciprocal, 1.0, 0.0, 1.0, 0.0, SymbolicExpr::var("V"));
        assert!(r.evaluate_at(&[("V", 0.0)]).is_err());
        assert!(SymbolicExpr::var("f").evaluate_at(&[("V", 1.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let e = SymbolicExpr::sum(vec![
            SymbolicExpr::unary(
                Candidate::Exp,
                1.4334,
                -0.1,
                15.8267,
                0.0,
                SymbolicExpr::var("V"),
            ),
            SymbolicExpr::product(vec![SymbolicExpr::constant(-4.9957), SymbolicExpr::var("f")]),
            SymbolicExpr::constant(1.0 / 3.0),
        ]);
        let text = to_json(&e);
        assert_eq!(from_json(&text).unwrap(), e);
        assert!(from_json("{\"version\": 2, \"expr\": {\"node\": \"const\", \"value\": 1.0}}").is_err());
    }

    #[test]
    fn bookkeeping() {
        let e = SymbolicExpr::product(vec![
            SymbolicExpr::var("f"),
            SymbolicExpr::unary(Candidate::Sin, 1.0, 0.0, 1.0, 0.0, SymbolicExpr::var("V")),
        ]);
        assert_eq!(e.variables(), vec!["V".to_string(), "f".to_string()]);
        assert!(e.contains(Candidate::Sin));
        assert!(!e.contains(Candidate::Exp));
        assert_eq!(e.spline_count(), 0);
    }
}
