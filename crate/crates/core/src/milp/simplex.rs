//! Dense two-phase simplex for LPs with bounded variables.
//!
//! Nonbasic variables rest at their lower or upper bound, so variable bounds
//! never become explicit rows. Phase 1 minimizes the sum of artificial
//! variables from a deterministic initial basis (slacks where the residual
//! sign permits, artificials elsewhere); phase 2 minimizes the real
//! objective. Dantzig pricing with a permanent switch to Bland's rule after
//! `2 * (m + n)` degenerate pivots guarantees termination.

use super::{MilpError, Relation};
use std::time::Instant;

/// Optimality tolerance on reduced costs.
const TOL_COST: f64 = 1e-9;
/// Smallest usable pivot magnitude.
const TOL_PIVOT: f64 = 1e-9;
/// Steps at or below this are counted as degenerate.
const TOL_DEGENERATE: f64 = 1e-12;
/// Residual above which phase 1 declares infeasibility.
const TOL_PHASE1: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    /// Objective value and values of the structural variables.
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Sparse row data shared across repeated solves with different bounds.
pub(crate) struct LpData {
    pub n_structural: usize,
    /// `(terms, relation, rhs)` per row; terms are (structural index, coeff).
    pub rows: Vec<(Vec<(usize, f64)>, Relation, f64)>,
    /// Minimization costs over structural variables.
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Row-major m x n working tableau.
    a: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    xval: Vec<f64>,
    degenerate_pivots: usize,
    bland: bool,
    iterations: usize,
}

impl Tableau {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    fn entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (var, dir, score)
        for j in 0..self.n {
            if self.state[j] == VarState::Basic || self.hi[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let d = self.cost[j];
            let (dir, score) = match self.state[j] {
                VarState::AtLower if d < -TOL_COST => (1.0, -d),
                VarState::AtUpper if d > TOL_COST => (-1.0, d),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One simplex step. Returns Ok(true) if an improving step was taken,
    /// Ok(false) at optimality, Err(()) on an unbounded ray.
    fn step(&mut self) -> Result<bool, ()> {
        let (j, dir) = match self.entering() {
            Some(e) => e,
            None => return Ok(false),
        };

        // Ratio test: step length t >= 0 along `dir`.
        let own_range = self.hi[j] - self.lo[j];
        let mut t_best = own_range; // may be +inf for slacks
        let mut leave: Option<usize> = None;
        for i in 0..self.m {
            let coef = self.a[i * self.n + j] * dir;
            let b = self.basis[i];
            if coef > TOL_PIVOT {
                let t = (self.xval[b] - self.lo[b]) / coef;
                if t < t_best - TOL_DEGENERATE {
                    t_best = t;
                    leave = Some(i);
                }
            } else if coef < -TOL_PIVOT && self.hi[b].is_finite() {
                let t = (self.hi[b] - self.xval[b]) / (-coef);
                if t < t_best - TOL_DEGENERATE {
                    t_best = t;
                    leave = Some(i);
                }
            }
        }
        if !t_best.is_finite() {
            return Err(());
        }
        let t = t_best.max(0.0);
        if t <= TOL_DEGENERATE {
            self.degenerate_pivots += 1;
            if self.degenerate_pivots > 2 * (self.m + self.n) {
                self.bland = true;
            }
        }

        // Move the solution point.
        if t > 0.0 {
            for i in 0..self.m {
                let b = self.basis[i];
                self.xval[b] -= self.a[i * self.n + j] * dir * t;
            }
            self.xval[j] += dir * t;
        }

        match leave {
            None => {
                // Bound flip; no basis change.
                self.state[j] = if dir > 0.0 {
                    self.xval[j] = self.hi[j];
                    VarState::AtUpper
                } else {
                    self.xval[j] = self.lo[j];
                    VarState::AtLower
                };
            }
            Some(r) => {
                let lv = self.basis[r];
                let hit_lower = self.a[r * self.n + j] * dir > 0.0;
                self.state[lv] = if hit_lower {
                    self.xval[lv] = self.lo[lv];
                    VarState::AtLower
                } else {
                    self.xval[lv] = self.hi[lv];
                    VarState::AtUpper
                };
                self.pivot(r, j);
            }
        }
        self.iterations += 1;
        Ok(true)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let piv = self.a[r * n + j];
        debug_assert!(piv.abs() > TOL_PIVOT / 10.0, "tiny pivot {piv}");
        let inv = 1.0 / piv;
        for v in &mut self.a[r * n..(r + 1) * n] {
            *v *= inv;
        }
        // Split borrows: copy the pivot row once.
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.a[i * n + j];
            if factor.abs() > 1e-12 {
                let row = &mut self.a[i * n..(i + 1) * n];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[j] = 0.0;
            }
        }
        let cfac = self.cost[j];
        if cfac.abs() > 1e-12 {
            for (c, p) in self.cost.iter_mut().zip(&pivot_row) {
                *c -= cfac * p;
            }
            self.cost[j] = 0.0;
        }
        self.basis[r] = j;
        self.state[j] = VarState::Basic;
    }

    fn run(&mut self, deadline: Option<Instant>, max_iter: usize) -> Result<RunEnd, MilpError> {
        loop {
            if self.iterations > max_iter {
                return Err(MilpError::IterationLimit(self.iterations));
            }
            if let Some(d) = deadline {
                if self.iterations % 256 == 0 && Instant::now() > d {
                    return Ok(RunEnd::DeadlineHit);
                }
            }
            match self.step() {
                Ok(true) => {}
                Ok(false) => return Ok(RunEnd::Optimal),
                Err(()) => return Ok(RunEnd::Unbounded),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RunEnd {
    Optimal,
    Unbounded,
    DeadlineHit,
}

/// Solves `min cost . x` subject to `data.rows` and `lo <= x <= hi` on the
/// structural variables.
pub(crate) fn solve_lp(
    data: &LpData,
    lo: &[f64],
    hi: &[f64],
    deadline: Option<Instant>,
) -> Result<LpOutcome, MilpError> {
    let ns = data.n_structural;
    debug_assert_eq!(lo.len(), ns);
    debug_assert_eq!(hi.len(), ns);
    for j in 0..ns {
        if lo[j] > hi[j] + 1e-12 {
            return Ok(LpOutcome::Infeasible);
        }
    }
    let m = data.rows.len();
    let n_slack = data
        .rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let n = ns + n_slack + m; // worst case: artificial per row

    let mut t = Tableau {
        m,
        n,
        a: vec![0.0; m * n],
        lo: Vec::with_capacity(n),
        hi: Vec::with_capacity(n),
        cost: vec![0.0; n],
        basis: vec![usize::MAX; m],
        state: vec![VarState::AtLower; n],
        xval: vec![0.0; n],
        degenerate_pivots: 0,
        bland: false,
        iterations: 0,
    };
    t.lo.extend_from_slice(lo);
    t.hi.extend_from_slice(hi);

    // Structural variables start at the bound nearer zero (deterministic,
    // keeps initial residuals small).
    for j in 0..ns {
        t.xval[j] = if lo[j].abs() <= hi[j].abs() { lo[j] } else { hi[j] };
        t.state[j] = if t.xval[j] == lo[j] {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
    }

    // Fill structural columns and assign slack columns.
    let mut slack_of_row = vec![usize::MAX; m];
    let mut next = ns;
    for (i, (terms, rel, _)) in data.rows.iter().enumerate() {
        for (j, c) in terms {
            t.a[i * n + j] += c;
        }
        match rel {
            Relation::Le => {
                t.a[i * n + next] = 1.0;
                slack_of_row[i] = next;
                t.lo.push(0.0);
                t.hi.push(f64::INFINITY);
                next += 1;
            }
            Relation::Ge => {
                t.a[i * n + next] = -1.0;
                slack_of_row[i] = next;
                t.lo.push(0.0);
                t.hi.push(f64::INFINITY);
                next += 1;
            }
            Relation::Eq => {}
        }
    }
    // Continue filling lo/hi for potential artificial columns.
    while t.lo.len() < n {
        t.lo.push(0.0);
        t.hi.push(f64::INFINITY);
    }

    // Initial basis: slack when the row residual fits its sign, else an
    // artificial with matching sign. Rows are normalized so that the basic
    // column is +1.
    let mut art_base = next;
    let mut phase1_cost = vec![0.0; n];
    for i in 0..m {
        let (terms, rel, rhs) = &data.rows[i];
        let mut resid = *rhs;
        for (j, c) in terms {
            resid -= c * t.xval[*j];
        }
        let use_slack = match rel {
            Relation::Le => resid >= 0.0,
            Relation::Ge => resid <= 0.0,
            Relation::Eq => false,
        };
        if use_slack {
            let s = slack_of_row[i];
            // Slack coefficient: +1 for Le, -1 for Ge. Normalize to +1.
            if *rel == Relation::Ge {
                for v in &mut t.a[i * n..(i + 1) * n] {
                    *v = -*v;
                }
            }
            t.basis[i] = s;
            t.state[s] = VarState::Basic;
            t.xval[s] = resid.abs();
        } else {
            let a_col = art_base;
            art_base += 1;
            let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
            t.a[i * n + a_col] = sign;
            if sign < 0.0 {
                for v in &mut t.a[i * n..(i + 1) * n] {
                    *v = -*v;
                }
            }
            t.basis[i] = a_col;
            t.state[a_col] = VarState::Basic;
            t.xval[a_col] = resid.abs();
            phase1_cost[a_col] = 1.0;
        }
    }
    let first_artificial = next;
    let artificials_used = art_base - next;

    let max_iter = 20_000 + 200 * (m + n);

    // Phase 1.
    if artificials_used > 0 {
        // Reduced costs: d_j = c_j - sum_i c_B(i) * a_ij.
        t.cost = phase1_cost.clone();
        for i in 0..m {
            let cb = phase1_cost[t.basis[i]];
            if cb != 0.0 {
                let row = t.row(i).to_vec();
                for (c, aij) in t.cost.iter_mut().zip(&row) {
                    *c -= cb * aij;
                }
            }
        }
        match t.run(deadline, max_iter)? {
            RunEnd::Optimal => {}
            // Any unbounded ray in phase 1 means the artificial sum can be
            // driven to 0; treat a clean 0 as feasible below. DeadlineHit is
            // surfaced as Infeasible-unknown; the MILP layer owns timeouts
            // and applies them at node granularity, so this stays rare.
            RunEnd::Unbounded | RunEnd::DeadlineHit => return Ok(LpOutcome::Infeasible),
        }
        let infeas: f64 = (first_artificial..n).map(|j| t.xval[j].max(0.0)).sum();
        if infeas > TOL_PHASE1 {
            return Ok(LpOutcome::Infeasible);
        }
        // Lock artificials at zero for phase 2.
        for j in first_artificial..n {
            t.lo[j] = 0.0;
            t.hi[j] = 0.0;
            t.xval[j] = 0.0;
        }
        t.degenerate_pivots = 0;
        t.bland = false;
    }

    // Phase 2.
    let mut full_cost = vec![0.0; n];
    full_cost[..ns].copy_from_slice(&data.cost);
    t.cost = full_cost.clone();
    for i in 0..m {
        let cb = full_cost[t.basis[i]];
        if cb != 0.0 {
            let row = t.row(i).to_vec();
            for (c, aij) in t.cost.iter_mut().zip(&row) {
                *c -= cb * aij;
            }
        }
    }
    match t.run(deadline, max_iter)? {
        RunEnd::Optimal => {}
        RunEnd::Unbounded => return Ok(LpOutcome::Unbounded),
        // On a deadline the current point is feasible but possibly
        // suboptimal: report it; the MILP layer re-checks its own clock and
        // will stop expanding regardless.
        RunEnd::DeadlineHit => {}
    }

    let values: Vec<f64> = (0..ns)
        .map(|j| t.xval[j].clamp(lo[j], hi[j]))
        .collect();
    let objective: f64 = data.cost.iter().zip(&values).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { objective, values })
}
