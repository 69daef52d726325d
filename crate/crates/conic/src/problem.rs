//! Problem construction: variables, affine expressions, cone constraints.

use crate::cones::{svec_len, Cone};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Handle to a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

/// Affine expression `constant + sum coef * var`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        LinExpr {
            terms: vec![(v.0, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compact(&self) -> Vec<(usize, f64)> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, c) in &self.terms {
            *map.entry(i).or_insert(0.0) += c;
        }
        map.into_iter().filter(|&(_, c)| c != 0.0).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let r = rhs.into();
        self.terms.extend(r.terms);
        self.constant += r.constant;
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs;
        self
    }
}

impl<T: Into<LinExpr>> SubAssign<T> for LinExpr {
    fn sub_assign(&mut self, rhs: T) {
        let r = rhs.into();
        self.terms.extend(r.terms.into_iter().map(|(i, c)| (i, -c)));
        self.constant -= r.constant;
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for t in self.terms.iter_mut() {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl Mul<f64> for Var {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

impl Mul<Var> for f64 {
    type Output = LinExpr;
    fn mul(self, v: Var) -> LinExpr {
        LinExpr::term(v, self)
    }
}

impl Mul<LinExpr> for f64 {
    type Output = LinExpr;
    fn mul(self, e: LinExpr) -> LinExpr {
        e * self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Neg for Var {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        LinExpr::term(self, -1.0)
    }
}

impl<T: Into<LinExpr>> Add<T> for Var {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for Var {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

/// A conic program in the form
///
/// ```text
/// maximize    objective' x + objective_constant
/// subject to  A x = b
///             h - G x  in  K_1 x ... x K_r
/// ```
///
/// with `G` and `A` stored as sparse rows.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub var_names: Vec<String>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub cones: Vec<Cone>,
    pub cone_labels: Vec<String>,
    pub g: Vec<Vec<(usize, f64)>>,
    pub h: Vec<f64>,
    pub a: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_cone_rows(&self) -> usize {
        self.h.len()
    }

    pub fn num_eq(&self) -> usize {
        self.b.len()
    }

    /// Human-readable listing of the whole problem.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "conic problem: {} variables, {} cone rows in {} cones, {} equalities",
            self.num_vars(),
            self.num_cone_rows(),
            self.cones.len(),
            self.num_eq()
        );
        let _ = writeln!(
            out,
            "maximize {}",
            fmt_affine(&self.objective, self.objective_constant, &self.var_names, 1.0)
        );
        for (i, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "var {i} {name}");
        }
        for (i, row) in self.a.iter().enumerate() {
            let _ = writeln!(
                out,
                "eq {i}: {} = {:.12e}",
                fmt_affine(row, 0.0, &self.var_names, 1.0),
                self.b[i]
            );
        }
        let mut row = 0;
        for (k, cone) in self.cones.iter().enumerate() {
            let label = self.cone_labels.get(k).map(String::as_str).unwrap_or("");
            let _ = writeln!(out, "cone {k} {cone:?} {label}");
            for _ in 0..cone.dim() {
                let _ = writeln!(
                    out,
                    "  s[{row}] = {}",
                    fmt_affine(&self.g[row], self.h[row], &self.var_names, -1.0)
                );
                row += 1;
            }
        }
        out
    }
}

fn fmt_affine(terms: &[(usize, f64)], constant: f64, names: &[String], sign: f64) -> String {
    let mut s = format!("{constant:.12e}");
    for &(i, c) in terms {
        let c = sign * c;
        let op = if c < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {op} {:.12e}*{}", c.abs(), names[i]);
    }
    s
}

/// Incremental construction of a [`ConicProblem`].
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    prob: ConicProblem,
    pending_label: Option<String>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: impl Into<String>) -> Var {
        self.prob.var_names.push(name.into());
        Var(self.prob.var_names.len() - 1)
    }

    pub fn vars(&mut self, prefix: &str, n: usize) -> Vec<Var> {
        (0..n).map(|i| self.var(format!("{prefix}{i}"))).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.prob.var_names.len()
    }

    /// Sets the label attached to the next cone constraint (shown in dumps).
    pub fn label(&mut self, l: impl Into<String>) -> &mut Self {
        self.pending_label = Some(l.into());
        self
    }

    pub fn maximize(&mut self, e: impl Into<LinExpr>) {
        let e = e.into();
        self.prob.objective = e.compact();
        self.prob.objective_constant = e.constant;
    }

    fn push_cone(&mut self, cone: Cone, rows: Vec<LinExpr>) {
        debug_assert_eq!(cone.dim(), rows.len());
        for r in rows {
            // slack = constant + coef x = h - G x
            self.prob.h.push(r.constant);
            self.prob
                .g
                .push(r.compact().into_iter().map(|(i, c)| (i, -c)).collect());
        }
        self.prob.cones.push(cone);
        self.prob
            .cone_labels
            .push(self.pending_label.take().unwrap_or_default());
    }

    /// `e >= 0`.
    pub fn nonneg(&mut self, e: impl Into<LinExpr>) {
        self.push_cone(Cone::NonNeg(1), vec![e.into()]);
    }

    /// `lhs <= rhs`.
    pub fn le(&mut self, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        let e = rhs.into() - lhs.into();
        self.nonneg(e);
    }

    /// `lhs >= rhs`.
    pub fn ge(&mut self, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        let e = lhs.into() - rhs.into();
        self.nonneg(e);
    }

    /// `entries[0] >= || entries[1..] ||`.
    pub fn soc(&mut self, entries: Vec<LinExpr>) {
        assert!(!entries.is_empty(), "second-order cone needs at least one entry");
        self.push_cone(Cone::Soc(entries.len()), entries);
    }

    /// The symmetric matrix whose `svec` is `entries` is PSD.
    pub fn psd(&mut self, order: usize, entries: Vec<LinExpr>) {
        assert_eq!(entries.len(), svec_len(order), "svec length mismatch");
        self.push_cone(Cone::Psd(order), entries);
    }

    /// `lhs == rhs`.
    pub fn eq(&mut self, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        let e = lhs.into() - rhs.into();
        self.prob.a.push(e.compact());
        self.prob.b.push(-e.constant);
    }

    pub fn build(self) -> ConicProblem {
        self.prob
    }
}
