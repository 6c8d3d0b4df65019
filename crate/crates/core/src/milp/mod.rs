//! Self-contained mixed-integer linear programming.
//!
//! A dense bounded-variable simplex solves LP relaxations; best-first
//! branch-and-bound over binary variables closes the integrality gap. Sized
//! for verification queries with tens of binaries and hundreds of continuous
//! variables.
//!
//! Every variable must carry finite bounds (binaries are fixed to `[0, 1]`).
//! Strict inequalities are unrepresentable by design: [`Relation`] only has
//! `Le`, `Eq`, `Ge`, so callers encode `< 0` as `<= -delta` and own that
//! approximation explicitly.

mod branch;
mod simplex;

pub use branch::LpRelaxation;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;
use thiserror::Error;

/// Feasibility tolerance for reported solutions.
pub const TOL_FEAS: f64 = 1e-6;
/// Integrality tolerance for binary variables in reported solutions.
pub const TOL_INT: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MilpError {
    #[error("variable {0} has non-finite bounds")]
    UnboundedVariable(String),
    #[error("non-finite coefficient in {0}")]
    NonFiniteCoefficient(String),
    #[error("unknown variable `{0}` in assignment")]
    UnknownVariable(String),
    #[error("assignment missing variable `{0}`")]
    MissingVariable(String),
    #[error("variable id {0} out of range")]
    BadVarId(usize),
    #[error("simplex iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
}

/// Handle to a variable of one [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    /// Branch-and-bound picks fractional binaries of the highest priority
    /// class first (default 0).
    pub branch_priority: i32,
}

/// Linear expression: a sparse list of `(variable, coefficient)` terms.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(var: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
        }
    }

    pub fn from_terms(terms: &[(VarId, f64)]) -> Self {
        Self {
            terms: terms.to_vec(),
        }
    }

    pub fn add(&mut self, var: VarId, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Collapses duplicate variables, summing coefficients.
    fn compacted(&self) -> Vec<(usize, f64)> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (v, c) in &self.terms {
            *map.entry(v.0).or_insert(0.0) += c;
        }
        map.into_iter().filter(|(_, c)| *c != 0.0).collect()
    }
}

/// Non-strict constraint relation. Strict `<`/`>` are intentionally absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub expr: LinExpr,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// A mixed-integer linear program over explicitly bounded variables.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub(crate) vars: Vec<Variable>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) sense: Sense,
    pub(crate) objective: LinExpr,
}

impl Default for MilpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl MilpProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            sense: Sense::Minimize,
            objective: LinExpr::new(),
        }
    }

    /// Adds a continuous variable with finite bounds.
    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        let name = name.into();
        assert!(
            lo.is_finite() && hi.is_finite(),
            "variable {name} must have finite bounds (got [{lo}, {hi}])"
        );
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name,
            kind: VarKind::Continuous,
            lo,
            hi,
            branch_priority: 0,
        });
        id
    }

    /// Adds a 0/1 variable.
    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lo: 0.0,
            hi: 1.0,
            branch_priority: 0,
        });
        id
    }

    pub fn set_branch_priority(&mut self, id: VarId, priority: i32) {
        self.vars[id.0].branch_priority = priority;
    }

    /// Overwrites a variable's bounds (used by bound-tightening passes).
    pub fn set_bounds(&mut self, id: VarId, lo: f64, hi: f64) {
        assert!(lo.is_finite() && hi.is_finite(), "bounds must be finite");
        self.vars[id.0].lo = lo;
        self.vars[id.0].hi = hi;
    }

    pub fn add_constraint(&mut self, expr: LinExpr, rel: Relation, rhs: f64) {
        assert!(rhs.is_finite(), "constraint rhs must be finite");
        assert!(
            expr.terms.iter().all(|(_, c)| c.is_finite()),
            "constraint coefficients must be finite"
        );
        self.constraints.push(Constraint { expr, rel, rhs });
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        assert!(
            expr.terms.iter().all(|(_, c)| c.is_finite()),
            "objective coefficients must be finite"
        );
        self.sense = sense;
        self.objective = expr;
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.vars[id.0].name
    }

    pub fn bounds_of(&self, id: VarId) -> (f64, f64) {
        (self.vars[id.0].lo, self.vars[id.0].hi)
    }

    /// Solves to global optimality (absolute gap 1e-6) within the time limit.
    pub fn solve(&self, time_limit: Duration) -> Result<MilpVerdict, MilpError> {
        branch::solve(self, time_limit, false)
    }

    /// Like [`solve`](Self::solve) but stops at the first integer-feasible
    /// incumbent. The incumbent is reported as `Optimal` in the sense of "a
    /// feasible witness", not objective optimality; use only where any
    /// feasible point is acceptable.
    pub fn solve_first_feasible(&self, time_limit: Duration) -> Result<MilpVerdict, MilpError> {
        branch::solve(self, time_limit, true)
    }

    /// LP relaxation handle for bound-tightening queries.
    pub fn relaxation(&self) -> Result<LpRelaxation, MilpError> {
        LpRelaxation::new(self)
    }

    /// Checks a full assignment (indexed by [`VarId`]) against every bound
    /// and constraint. Returns whether all violations are within
    /// [`TOL_FEAS`], together with the maximum violation magnitude.
    pub fn check_feasible(&self, values: &[f64]) -> (bool, f64) {
        assert_eq!(values.len(), self.vars.len(), "assignment length mismatch");
        let mut worst = 0.0f64;
        for (v, val) in self.vars.iter().zip(values) {
            worst = worst.max(v.lo - val).max(val - v.hi);
        }
        for c in &self.constraints {
            let lhs = c.expr.eval(values);
            let viol = match c.rel {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        (worst <= TOL_FEAS, worst.max(0.0))
    }

    /// Name-keyed variant of [`check_feasible`](Self::check_feasible); errors
    /// on assignments that do not cover every variable.
    pub fn check_feasible_named(
        &self,
        assignment: &BTreeMap<String, f64>,
    ) -> Result<(bool, f64), MilpError> {
        let mut values = vec![0.0; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate() {
            match assignment.get(&v.name) {
                Some(val) => values[i] = *val,
                None => return Err(MilpError::MissingVariable(v.name.clone())),
            }
        }
        Ok(self.check_feasible(&values))
    }

    fn validate(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if !v.lo.is_finite() || !v.hi.is_finite() {
                return Err(MilpError::UnboundedVariable(v.name.clone()));
            }
        }
        for (v, _) in &self.objective.terms {
            if v.0 >= self.vars.len() {
                return Err(MilpError::BadVarId(v.0));
            }
        }
        for c in &self.constraints {
            for (v, _) in &c.expr.terms {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::BadVarId(v.0));
                }
            }
        }
        Ok(())
    }

    /// Debug export in LP text format for cross-checking against external
    /// solvers by hand.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}",
            match self.sense {
                Sense::Maximize => "Maximize",
                Sense::Minimize => "Minimize",
            }
        );
        let _ = write!(s, " obj:");
        if self.objective.terms.is_empty() {
            let _ = write!(s, " 0 {}", self.vars.first().map(|v| v.name.as_str()).unwrap_or("x"));
        }
        for (v, c) in &self.objective.terms {
            let _ = write!(s, " {} {}", fmt_signed(*c), self.vars[v.0].name);
        }
        let _ = writeln!(s, "\nSubject To");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, " c{i}:");
            for (v, coeff) in &c.expr.terms {
                let _ = write!(s, " {} {}", fmt_signed(*coeff), self.vars[v.0].name);
            }
            let rel = match c.rel {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, " {rel} {}", c.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for v in &self.vars {
            let _ = writeln!(s, " {} <= {} <= {}", v.lo, v.name, v.hi);
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            let _ = writeln!(s, "Binaries\n {}", binaries.join(" "));
        }
        let _ = writeln!(s, "End");
        s
    }
}

fn fmt_signed(c: f64) -> String {
    if c >= 0.0 {
        format!("+{c}")
    } else {
        format!("{c}")
    }
}

/// A feasible solution with its objective value.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
}

impl MilpSolution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn assignment(&self, problem: &MilpProblem) -> BTreeMap<String, f64> {
        problem
            .vars
            .iter()
            .zip(&self.values)
            .map(|(v, val)| (v.name.clone(), *val))
            .collect()
    }
}

/// Solver outcome.
#[derive(Debug, Clone)]
pub enum MilpVerdict {
    Optimal(MilpSolution),
    Infeasible,
    Unbounded,
    TimedOut(Option<MilpSolution>),
}

impl MilpVerdict {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, MilpVerdict::Infeasible)
    }

    pub fn optimal(&self) -> Option<&MilpSolution> {
        match self {
            MilpVerdict::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn limit() -> Duration {
        Duration::from_secs(10)
    }

    #[test]
    fn maximize_single_bounded_variable() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 3.0);
        p.set_objective(Sense::Maximize, LinExpr::term(x, 1.0));
        let v = p.solve(limit()).unwrap();
        let sol = v.optimal().expect("optimal");
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.value(x) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn binary_knapsack_rounding() {
        // maximize x+y subject to x+y <= 1.5, x,y binary -> optimum 1.
        let mut p = MilpProblem::new();
        let x = p.add_binary("x");
        let y = p.add_binary("y");
        let mut e = LinExpr::new();
        e.add(x, 1.0).add(y, 1.0);
        p.add_constraint(e.clone(), Relation::Le, 1.5);
        p.set_objective(Sense::Maximize, e);
        let v = p.solve(limit()).unwrap();
        let sol = v.optimal().expect("optimal");
        assert!((sol.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", -10.0, 10.0);
        p.add_constraint(LinExpr::term(x, 1.0), Relation::Ge, 2.0);
        p.add_constraint(LinExpr::term(x, 1.0), Relation::Le, 1.0);
        assert!(p.solve(limit()).unwrap().is_infeasible());
    }

    #[test]
    fn optimal_assignment_passes_check_feasible() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", -1.0, 4.0);
        let y = p.add_continuous("y", 0.0, 4.0);
        let mut e = LinExpr::new();
        e.add(x, 2.0).add(y, 1.0);
        p.add_constraint(e, Relation::Le, 5.0);
        let mut o = LinExpr::new();
        o.add(x, 1.0).add(y, 1.0);
        p.set_objective(Sense::Maximize, o);
        let v = p.solve(limit()).unwrap();
        let sol = v.optimal().expect("optimal");
        let (ok, worst) = p.check_feasible(&sol.values);
        assert!(ok, "violation {worst}");
        let named = sol.assignment(&p);
        assert!(p.check_feasible_named(&named).unwrap().0);
    }

    #[test]
    fn check_feasible_reports_violation() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", -10.0, 10.0);
        p.add_constraint(LinExpr::term(x, 1.0), Relation::Le, 1.0);
        let (ok, worst) = p.check_feasible(&[1.5]);
        assert!(!ok);
        assert!((worst - 0.5).abs() < 1e-12);
    }

    #[test]
    fn check_feasible_named_missing_variable_errors() {
        let mut p = MilpProblem::new();
        p.add_continuous("x", 0.0, 1.0);
        let empty = BTreeMap::new();
        assert!(matches!(
            p.check_feasible_named(&empty),
            Err(MilpError::MissingVariable(_))
        ));
    }

    #[test]
    fn equality_constraint_respected() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", -5.0, 5.0);
        let y = p.add_continuous("y", -5.0, 5.0);
        let mut e = LinExpr::new();
        e.add(x, 1.0).add(y, 1.0);
        p.add_constraint(e, Relation::Eq, 2.0);
        p.set_objective(Sense::Minimize, LinExpr::term(x, 1.0));
        let v = p.solve(limit()).unwrap();
        let sol = v.optimal().expect("optimal");
        // y <= 5 forces x >= -3 on the line x + y = 2.
        assert!((sol.value(x) + 3.0).abs() < 1e-8, "x = {}", sol.value(x));
        assert!((sol.value(y) - 5.0).abs() < 1e-8, "y = {}", sol.value(y));
    }

    #[test]
    fn deterministic_verdicts() {
        let mut p = MilpProblem::new();
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let c = p.add_binary("c");
        let x = p.add_continuous("x", 0.0, 2.0);
        let mut e = LinExpr::new();
        e.add(a, 1.0).add(b, 2.0).add(c, 3.0).add(x, 1.0);
        p.add_constraint(e, Relation::Le, 4.0);
        let mut o = LinExpr::new();
        o.add(a, 2.0).add(b, 3.0).add(c, 4.0).add(x, 0.5);
        p.set_objective(Sense::Maximize, o);
        let s1 = p.solve(limit()).unwrap().optimal().unwrap().clone();
        let s2 = p.solve(limit()).unwrap().optimal().unwrap().clone();
        assert_eq!(s1.values, s2.values);
        assert_eq!(s1.objective, s2.objective);
    }

    #[test]
    fn lp_format_mentions_sections() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 1.0);
        let z = p.add_binary("z");
        let mut e = LinExpr::new();
        e.add(x, 1.0).add(z, -2.0);
        p.add_constraint(e, Relation::Ge, -1.0);
        p.set_objective(Sense::Maximize, LinExpr::term(x, 1.0));
        let txt = p.to_lp_format();
        for section in ["Maximize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(txt.contains(section), "missing {section} in:\n{txt}");
        }
    }
}
