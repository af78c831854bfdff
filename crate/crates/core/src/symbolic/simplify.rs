//! Canonical polynomial form, rounding, rendering and denormalization.
//!
//! Expressions are expanded into a sum of monomials over variables and
//! atoms. An atom is a non-polynomial unary applied to a canonical inner
//! polynomial, a spline marker, or (when expansion is disabled) an integer
//! power of a multi-term polynomial.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::expr::SymbolicExpr;
use super::library::Candidate;
use crate::error::Result;
use crate::kan::ActivationEdge;
use crate::training::{Channel, NormStats};

/// Default number of decimals for simplification and rendering.
pub const DEFAULT_DECIMALS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplifyOptions {
    pub decimals: u32,
    /// Multiply out integer powers of multi-term polynomials. When false,
    /// forms such as `(V + 0.4925)^2` stay factored.
    pub expand: bool,
}

impl Default for SimplifyOptions {
    fn default() -> Self {
        Self {
            decimals: DEFAULT_DECIMALS,
            expand: true,
        }
    }
}

impl SimplifyOptions {
    pub fn decimals(decimals: u32) -> Self {
        Self {
            decimals,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
enum AtomKind {
    Var(String),
    Func(Candidate, Poly),
    Power(u32, Poly),
    Spline {
        label: String,
        edge: Box<ActivationEdge>,
        inner: Poly,
    },
}

#[derive(Debug, Clone)]
struct Atom {
    key: String,
    kind: AtomKind,
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Atom {}
impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl Atom {
    fn new(kind: AtomKind) -> Self {
        // Variables sort before every other atom.
        let key = match &kind {
            AtomKind::Var(n) => format!("0{n}"),
            AtomKind::Func(c, p) => format!("1{c}({})", p.key()),
            AtomKind::Power(k, p) => format!("2^{k}({})", p.key()),
            AtomKind::Spline { label, inner, .. } => format!("3{label}({})", inner.key()),
        };
        Atom { key, kind }
    }

    fn is_var(&self) -> bool {
        matches!(self.kind, AtomKind::Var(_))
    }
}

type Monomial = Vec<(Atom, u32)>;

#[derive(Debug, Clone, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

fn merge_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<Atom, u32> = a.iter().cloned().collect();
    for (atom, e) in b {
        *out.entry(atom.clone()).or_insert(0) += e;
    }
    out.into_iter().collect()
}

impl Poly {
    fn constant(c: f64) -> Self {
        let mut p = Poly::default();
        p.add_term(Vec::new(), c);
        p
    }

    fn atom(atom: Atom) -> Self {
        let mut p = Poly::default();
        p.add_term(vec![(atom, 1)], 1.0);
        p
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    fn add(mut self, other: &Poly) -> Poly {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), *c);
        }
        self
    }

    fn scale(mut self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::default();
        }
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(merge_monomials(ma, mb), ca * cb);
            }
        }
        out
    }

    fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    fn key(&self) -> String {
        let mut s = String::new();
        for (m, c) in &self.terms {
            let _ = write!(s, "{c:?}");
            for (a, e) in m {
                let _ = write!(s, "*{}^{e}", a.key);
            }
            s.push(';');
        }
        s
    }
}

fn to_poly(expr: &SymbolicExpr, expand: bool) -> Poly {
    match expr {
        SymbolicExpr::Const { value } => Poly::constant(*value),
        SymbolicExpr::Var { name } => Poly::atom(Atom::new(AtomKind::Var(name.clone()))),
        SymbolicExpr::Sum { terms } => terms
            .iter()
            .fold(Poly::default(), |acc, t| acc.add(&to_poly(t, expand))),
        SymbolicExpr::Product { factors } => factors
            .iter()
            .fold(Poly::constant(1.0), |acc, f| acc.mul(&to_poly(f, expand))),
        SymbolicExpr::Pow { base, exp } => power(to_poly(base, expand), *exp, expand),
        SymbolicExpr::Unary {
            func,
            a,
            b,
            c,
            d,
            arg,
        } => {
            let inner = to_poly(arg, expand).scale(*a).add(&Poly::constant(*b));
            let g = apply(*func, inner, expand);
            g.scale(*c).add(&Poly::constant(*d))
        }
        SymbolicExpr::Spline { label, edge, arg } => {
            let inner = to_poly(arg, expand);
            spline_atom(label.clone(), edge.clone(), inner)
        }
    }
}

fn power(base: Poly, k: u32, expand: bool) -> Poly {
    if k == 0 {
        return Poly::constant(1.0);
    }
    if k == 1 || expand || base.terms.len() <= 1 {
        base.pow(k)
    } else {
        Poly::atom(Atom::new(AtomKind::Power(k, base)))
    }
}

/// `g(inner)` as a polynomial; constants are folded when `g` is defined
/// there.
fn apply(func: Candidate, inner: Poly, expand: bool) -> Poly {
    if func == Candidate::Constant {
        return Poly::default();
    }
    if let Some(k) = func.power() {
        return power(inner, k, expand);
    }
    if let Some(x) = inner.as_constant() {
        if let Some(g) = func.eval(x) {
            return Poly::constant(g);
        }
    }
    Poly::atom(Atom::new(AtomKind::Func(func, inner)))
}

fn spline_atom(label: String, edge: Box<ActivationEdge>, inner: Poly) -> Poly {
    if let Some(x) = inner.as_constant() {
        let v = edge.forward(x);
        if v.is_finite() {
            return Poly::constant(v);
        }
    }
    Poly::atom(Atom::new(AtomKind::Spline { label, edge, inner }))
}

fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let r = (x * scale).round_ties_even() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Rounds inner polynomials of atoms, rebuilds (folding atoms that became
/// constant), then rounds and drops outer coefficients.
fn round_poly(p: &Poly, decimals: u32, expand: bool) -> Poly {
    let mut out = Poly::default();
    for (m, c) in &p.terms {
        let mut term = Poly::constant(*c);
        for (atom, e) in m {
            let factor = match &atom.kind {
                AtomKind::Var(_) => Poly::atom(atom.clone()),
                AtomKind::Func(f, inner) => apply(*f, round_poly(inner, decimals, expand), expand),
                AtomKind::Power(k, inner) => power(round_poly(inner, decimals, expand), *k, expand),
                AtomKind::Spline { label, edge, inner } => {
                    spline_atom(label.clone(), edge.clone(), round_poly(inner, decimals, expand))
                }
            };
            term = term.mul(&factor.pow(*e));
        }
        out = out.add(&term);
    }
    let mut rounded = Poly::default();
    for (m, c) in out.terms {
        rounded.add_term(m, round_half_even(c, decimals));
    }
    rounded
}

fn atom_expr(atom: &Atom) -> SymbolicExpr {
    match &atom.kind {
        AtomKind::Var(n) => SymbolicExpr::var(n.clone()),
        AtomKind::Func(f, inner) => SymbolicExpr::unary(*f, 1.0, 0.0, 1.0, 0.0, from_poly(inner)),
        AtomKind::Power(k, inner) => SymbolicExpr::pow(from_poly(inner), *k),
        AtomKind::Spline { label, edge, inner } => SymbolicExpr::Spline {
            label: label.clone(),
            edge: edge.clone(),
            arg: Box::new(from_poly(inner)),
        },
    }
}

fn from_poly(p: &Poly) -> SymbolicExpr {
    let mut terms: Vec<SymbolicExpr> = ordered_terms(p, &|m| full_text(m))
        .into_iter()
        .map(|(m, c)| {
            if m.is_empty() {
                return SymbolicExpr::constant(c);
            }
            let mut factors = vec![SymbolicExpr::constant(c)];
            for (a, e) in m {
                let base = atom_expr(a);
                factors.push(if *e == 1 { base } else { SymbolicExpr::pow(base, *e) });
            }
            SymbolicExpr::product(factors)
        })
        .collect();
    match terms.len() {
        0 => SymbolicExpr::constant(0.0),
        1 => terms.pop().unwrap(),
        _ => SymbolicExpr::sum(terms),
    }
}

fn full_text(m: &Monomial) -> String {
    monomial_text(m, None)
}

/// Terms in display order: variable-only monomials by descending degree,
/// then monomials containing other atoms alphabetically, then the constant.
fn ordered_terms<'a>(p: &'a Poly, text: &dyn Fn(&Monomial) -> String) -> Vec<(&'a Monomial, f64)> {
    let mut poly_terms = Vec::new();
    let mut atom_terms = Vec::new();
    let mut constant = None;
    for (m, c) in &p.terms {
        if m.is_empty() {
            constant = Some((m, *c));
        } else if m.iter().all(|(a, _)| a.is_var()) {
            let degree: u32 = m.iter().map(|(_, e)| e).sum();
            poly_terms.push((degree, text(m), m, *c));
        } else {
            atom_terms.push((text(m), m, *c));
        }
    }
    poly_terms.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    atom_terms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(&Monomial, f64)> = poly_terms.into_iter().map(|(_, _, m, c)| (m, c)).collect();
    out.extend(atom_terms.into_iter().map(|(_, m, c)| (m, c)));
    out.extend(constant);
    out
}

fn fmt_num(x: f64, decimals: Option<u32>) -> String {
    match decimals {
        Some(d) => format!("{:.*}", d as usize, x),
        None => format!("{x:?}"),
    }
}

fn atom_text(atom: &Atom, decimals: Option<u32>) -> String {
    match &atom.kind {
        AtomKind::Var(n) => n.clone(),
        AtomKind::Func(Candidate::Reciprocal, inner) => format!("1/({})", poly_text(inner, decimals)),
        AtomKind::Func(f, inner) => format!("{}({})", f.name(), poly_text(inner, decimals)),
        AtomKind::Power(k, inner) => format!("({})^{k}", poly_text(inner, decimals)),
        AtomKind::Spline { label, inner, .. } => format!("{label}({})", poly_text(inner, decimals)),
    }
}

fn monomial_text(m: &Monomial, decimals: Option<u32>) -> String {
    let mut vars: Vec<String> = Vec::new();
    let mut others: Vec<String> = Vec::new();
    for (a, e) in m {
        let base = atom_text(a, decimals);
        let factor = match (e, &a.kind) {
            (1, _) => base,
            (_, AtomKind::Var(_)) => format!("{base}^{e}"),
            _ => format!("({base})^{e}"),
        };
        if a.is_var() {
            vars.push(factor);
        } else {
            others.push(factor);
        }
    }
    others.sort();
    vars.extend(others);
    vars.join("*")
}

fn poly_text(p: &Poly, decimals: Option<u32>) -> String {
    let terms = ordered_terms(p, &|m| monomial_text(m, decimals));
    if terms.is_empty() {
        return fmt_num(0.0, decimals);
    }
    let mut out = String::new();
    for (k, (m, c)) in terms.into_iter().enumerate() {
        let neg = c < 0.0;
        let mag = c.abs();
        let body = if m.is_empty() {
            fmt_num(mag, decimals)
        } else if mag == 1.0 {
            monomial_text(m, decimals)
        } else {
            format!("{}*{}", fmt_num(mag, decimals), monomial_text(m, decimals))
        };
        match (k, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&body);
    }
    out
}

fn simplified_poly(expr: &SymbolicExpr, opts: &SimplifyOptions) -> Poly {
    let mut p = round_poly(&to_poly(expr, opts.expand), opts.decimals, opts.expand);
    // Rounding can fold atoms into constants; iterate to a fixed point so
    // simplification is idempotent.
    for _ in 0..8 {
        let q = round_poly(&to_poly(&from_poly(&p), opts.expand), opts.decimals, opts.expand);
        if q.key() == p.key() {
            break;
        }
        p = q;
    }
    p
}

/// Expands, collects like terms, rounds coefficients half-to-even at
/// `decimals` and drops terms that round to zero.
pub fn simplify(expr: &SymbolicExpr, decimals: u32) -> SymbolicExpr {
    simplify_with(expr, &SimplifyOptions::decimals(decimals))
}

pub fn simplify_with(expr: &SymbolicExpr, opts: &SimplifyOptions) -> SymbolicExpr {
    from_poly(&simplified_poly(expr, opts))
}

/// Canonical form at full precision: expanded and collected, never rounded.
pub fn canonicalize(expr: &SymbolicExpr, expand: bool) -> SymbolicExpr {
    from_poly(&to_poly(expr, expand))
}

/// Polynomial terms by descending degree, then other terms alphabetically,
/// then the constant. Unit coefficients are omitted.
pub fn render(expr: &SymbolicExpr, decimals: u32) -> String {
    render_with(expr, &SimplifyOptions::decimals(decimals))
}

pub fn render_with(expr: &SymbolicExpr, opts: &SimplifyOptions) -> String {
    poly_text(&simplified_poly(expr, opts), Some(opts.decimals))
}

/// Coefficients `[c_0, c_1, ..]` when `expr` is a polynomial in the single
/// variable `var` (constants allowed), else `None`.
pub fn polynomial_coefficients(expr: &SymbolicExpr, var: &str) -> Option<Vec<f64>> {
    let p = to_poly(expr, true);
    let mut coeffs: Vec<f64> = Vec::new();
    for (m, c) in &p.terms {
        let degree = match m.as_slice() {
            [] => 0,
            [(a, e)] if matches!(&a.kind, AtomKind::Var(n) if n == var) => *e as usize,
            _ => return None,
        };
        if coeffs.len() <= degree {
            coeffs.resize(degree + 1, 0.0);
        }
        coeffs[degree] += c;
    }
    Some(coeffs)
}

/// Replaces variables for which `f` returns an expression.
pub fn substitute(expr: &SymbolicExpr, f: &dyn Fn(&str) -> Option<SymbolicExpr>) -> SymbolicExpr {
    let sub = |e: &SymbolicExpr| Box::new(substitute(e, f));
    match expr {
        SymbolicExpr::Const { .. } => expr.clone(),
        SymbolicExpr::Var { name } => f(name).unwrap_or_else(|| expr.clone()),
        SymbolicExpr::Sum { terms } => {
            SymbolicExpr::sum(terms.iter().map(|t| substitute(t, f)).collect())
        }
        SymbolicExpr::Product { factors } => {
            SymbolicExpr::product(factors.iter().map(|t| substitute(t, f)).collect())
        }
        SymbolicExpr::Pow { base, exp } => SymbolicExpr::Pow {
            base: sub(base),
            exp: *exp,
        },
        SymbolicExpr::Unary {
            func,
            a,
            b,
            c,
            d,
            arg,
        } => SymbolicExpr::Unary {
            func: *func,
            a: *a,
            b: *b,
            c: *c,
            d: *d,
            arg: sub(arg),
        },
        SymbolicExpr::Spline { label, edge, arg } => SymbolicExpr::Spline {
            label: label.clone(),
            edge: edge.clone(),
            arg: sub(arg),
        },
    }
}

/// Maps an expression over Z-scored inputs producing a Z-scored `target`
/// into physical units: every variable `v` becomes `(v - mean) / std`, and
/// the result is `std_y * expr + mean_y`.
///
/// The result is canonicalized at full precision; rounding is left to
/// [`render`] so the two evaluation paths agree to floating-point accuracy.
pub fn denormalize(expr: &SymbolicExpr, stats: &NormStats, target: Channel, expand: bool) -> Result<SymbolicExpr> {
    let mut inputs = BTreeMap::new();
    for name in expr.variables() {
        let ch = Channel::from_str(&name).map_err(|_| crate::Error::MissingChannel(name.clone()))?;
        inputs.insert(name, stats.get(ch)?);
    }
    let y = stats.get(target)?;
    let replaced = substitute(expr, &|name| {
        inputs.get(name).map(|s| {
            SymbolicExpr::sum(vec![
                SymbolicExpr::product(vec![
                    SymbolicExpr::constant(1.0 / s.std),
                    SymbolicExpr::var(name),
                ]),
                SymbolicExpr::constant(-s.mean / s.std),
            ])
        })
    });
    let wrapped = SymbolicExpr::sum(vec![
        SymbolicExpr::product(vec![SymbolicExpr::constant(y.std), replaced]),
        SymbolicExpr::constant(y.mean),
    ]);
    Ok(canonicalize(&wrapped, expand))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> SymbolicExpr {
        SymbolicExpr::var("x")
    }

    fn c(v: f64) -> SymbolicExpr {
        SymbolicExpr::constant(v)
    }

    #[test]
    fn expands_squared_affine() {
        // 2 (x + 1)^2 + 3
        let e = SymbolicExpr::sum(vec![
            SymbolicExpr::product(vec![
                c(2.0),
                SymbolicExpr::pow(SymbolicExpr::sum(vec![x(), c(1.0)]), 2),
            ]),
            c(3.0),
        ]);
        assert_eq!(render(&e, 4), "2.0000*x^2 + 4.0000*x + 5.0000");
        assert_eq!(polynomial_coefficients(&e, "x").unwrap(), vec![5.0, 4.0, 2.0]);
    }

    #[test]
    fn drops_negligible_terms() {
        let e = SymbolicExpr::sum(vec![
            x(),
            SymbolicExpr::product(vec![c(0.0), SymbolicExpr::pow(x(), 2)]),
            c(1e-12),
        ]);
        assert_eq!(simplify(&e, 4), SymbolicExpr::product(vec![c(1.0), x()]));
        assert_eq!(render(&e, 4), "x");
    }

    #[test]
    fn constant_rendering() {
        assert_eq!(render(&c(5.0), 4), "5.0000");
        assert_eq!(render(&c(0.0), 2), "0.00");
        assert_eq!(render(&c(-2.5), 0), "-2");
    }

    #[test]
    fn ordering_is_canonical() {
        let exp = SymbolicExpr::unary(Candidate::Exp, 1.4334, 0.0, 15.8267, 0.0, SymbolicExpr::var("V"));
        let terms = vec![
            c(1663.861),
            SymbolicExpr::product(vec![c(-4.9957), SymbolicExpr::var("f")]),
            exp,
            SymbolicExpr::product(vec![c(464.008), SymbolicExpr::var("V")]),
            SymbolicExpr::product(vec![c(32.594), SymbolicExpr::pow(SymbolicExpr::var("V"), 2)]),
        ];
        let expected = "32.5940*V^2 + 464.0080*V - 4.9957*f + 15.8267*exp(1.4334*V) + 1663.8610";
        assert_eq!(render(&SymbolicExpr::sum(terms.clone()), 4), expected);
        let mut rev = terms;
        rev.reverse();
        assert_eq!(render(&SymbolicExpr::sum(rev), 4), expected);
    }

    #[test]
    fn no_expand_keeps_squared_affine() {
        let e = SymbolicExpr::unary(
            Candidate::Square,
            -1.0,
            -0.4925,
            -117.7327,
            0.0,
            SymbolicExpr::var("V"),
        );
        let opts = SimplifyOptions {
            decimals: 4,
            expand: false,
        };
        assert_eq!(render_with(&e, &opts), "-117.7327*(-V - 0.4925)^2");
        assert_eq!(
            render(&e, 4),
            "-117.7327*V^2 - 115.9667*V - 28.5568"
        );
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(round_half_even(0.125, 2), 0.12);
        assert_eq!(round_half_even(0.375, 2), 0.38);
        assert_eq!(round_half_even(2.5, 0), 2.0);
        assert_eq!(round_half_even(-0.00004, 4), 0.0);
    }

    #[test]
    fn simplify_is_idempotent() {
        let e = SymbolicExpr::sum(vec![
            SymbolicExpr::unary(Candidate::Sin, 2.00004, 0.00003, 1.5, 0.2, x()),
            SymbolicExpr::unary(Candidate::Cube, 0.5, 1.0, 3.0, 0.0, x()),
            SymbolicExpr::unary(Candidate::Exp, 0.00001, 0.0, 2.0, 0.0, x()),
        ]);
        let once = simplify(&e, 4);
        let twice = simplify(&once, 4);
        assert_eq!(render(&once, 4), render(&twice, 4));
        assert_eq!(once, twice);
    }

    #[test]
    fn constant_arguments_fold() {
        let e = SymbolicExpr::unary(Candidate::Exp, 1.0, 0.0, 2.0, 1.0, c(0.0));
        assert_eq!(render(&e, 4), "3.0000");
    }

    #[test]
    fn non_polynomial_detected() {
        let e = SymbolicExpr::unary(Candidate::Tanh, 1.0, 0.0, 1.0, 0.0, x());
        assert!(polynomial_coefficients(&e, "x").is_none());
        let two = SymbolicExpr::product(vec![x(), SymbolicExpr::var("y")]);
        assert!(polynomial_coefficients(&two, "x").is_none());
    }
}
