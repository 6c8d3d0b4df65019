//! Best-first branch-and-bound over binary variables.
//!
//! Node selection is best-bound (ties broken by node id, so runs are
//! deterministic); branching picks the most-fractional binary with ties
//! broken by lowest variable index.

use super::simplex::{solve_lp, LpData, LpOutcome};
use super::{MilpError, MilpProblem, MilpSolution, MilpVerdict, Sense, VarKind, TOL_INT};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

/// Prune margin; keeps the final incumbent within the advertised 1e-6
/// absolute gap with room to spare.
const PRUNE_EPS: f64 = 1e-9;

struct Node {
    /// LP bound inherited from the parent (min sense).
    bound: f64,
    id: u64,
    /// (binary var index, fixed value) pairs along the path.
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; we want the smallest bound first. Ties
        // prefer the newest node (depth-first diving), which reaches integer
        // incumbents faster on feasibility-style problems.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.id.cmp(&other.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn solve(
    problem: &MilpProblem,
    time_limit: Duration,
    first_feasible: bool,
) -> Result<MilpVerdict, MilpError> {
    problem.validate()?;
    let start = Instant::now();
    let deadline = start + time_limit;

    // Internal sense: minimize. Maximize flips cost and objective sign.
    let flip = match problem.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    let ns = problem.vars.len();
    let mut cost = vec![0.0; ns];
    for (v, c) in &problem.objective.terms {
        cost[v.0] += flip * c;
    }
    let rows = problem
        .constraints
        .iter()
        .map(|c| (c.expr.compacted(), c.rel, c.rhs))
        .collect();
    let data = LpData {
        n_structural: ns,
        rows,
        cost,
    };
    let base_lo: Vec<f64> = problem.vars.iter().map(|v| v.lo).collect();
    let base_hi: Vec<f64> = problem.vars.iter().map(|v| v.hi).collect();
    let binaries: Vec<usize> = problem
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        fixes: Vec::new(),
    });
    let mut next_id = 1u64;
    let mut incumbent: Option<MilpSolution> = None;
    let mut incumbent_obj = f64::INFINITY; // min sense

    while let Some(node) = heap.pop() {
        if Instant::now() > deadline {
            return Ok(MilpVerdict::TimedOut(incumbent.map(|s| finalize(s, flip))));
        }
        if node.bound >= incumbent_obj - PRUNE_EPS {
            continue; // cannot improve
        }
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        for (j, v) in &node.fixes {
            lo[*j] = *v;
            hi[*j] = *v;
        }
        let (objective, values) = match solve_lp(&data, &lo, &hi, Some(deadline))? {
            LpOutcome::Optimal { objective, values } => (objective, values),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => return Ok(MilpVerdict::Unbounded),
        };
        if objective >= incumbent_obj - PRUNE_EPS {
            continue;
        }
        // Branch on the highest-priority fractional binary, most-fractional
        // within a priority class, ties to the lowest variable index.
        let mut branch_var: Option<(usize, (i32, f64))> = None;
        for &j in &binaries {
            // Distance to the nearest integer; 0.5 is maximally fractional.
            let frac = (values[j] - values[j].round()).abs();
            if frac > TOL_INT {
                let score = (problem.vars[j].branch_priority, frac);
                match branch_var {
                    Some((_, s)) if s >= score => {}
                    _ => branch_var = Some((j, score)),
                }
            }
        }
        match branch_var {
            None => {
                // Integer feasible.
                if objective < incumbent_obj - 1e-12 {
                    incumbent_obj = objective;
                    incumbent = Some(MilpSolution { values, objective });
                    if first_feasible {
                        return Ok(MilpVerdict::Optimal(finalize(
                            incumbent.expect("just set"),
                            flip,
                        )));
                    }
                }
            }
            Some((j, _)) => {
                for fixed in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, fixed));
                    heap.push(Node {
                        bound: objective,
                        id: next_id,
                        fixes,
                    });
                    next_id += 1;
                }
            }
        }
    }

    Ok(match incumbent {
        Some(sol) => MilpVerdict::Optimal(finalize(sol, flip)),
        None => MilpVerdict::Infeasible,
    })
}

fn finalize(mut sol: MilpSolution, flip: f64) -> MilpSolution {
    sol.objective *= flip;
    sol
}

/// Reusable LP relaxation of a problem (binaries relaxed to `[0, 1]`), for
/// optimality-based bound tightening.
pub struct LpRelaxation {
    data: LpData,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl LpRelaxation {
    pub(crate) fn new(problem: &MilpProblem) -> Result<Self, MilpError> {
        problem.validate()?;
        let rows = problem
            .constraints
            .iter()
            .map(|c| (c.expr.compacted(), c.rel, c.rhs))
            .collect();
        Ok(Self {
            data: LpData {
                n_structural: problem.vars.len(),
                rows,
                cost: vec![0.0; problem.vars.len()],
            },
            lo: problem.vars.iter().map(|v| v.lo).collect(),
            hi: problem.vars.iter().map(|v| v.hi).collect(),
        })
    }

    /// Minimum or maximum of one variable over the relaxation. `None` means
    /// the relaxation is infeasible (so the MILP is too).
    pub fn extremum(
        &mut self,
        var: super::VarId,
        sense: Sense,
    ) -> Result<Option<f64>, MilpError> {
        let flip = match sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        for c in &mut self.data.cost {
            *c = 0.0;
        }
        self.data.cost[var.0] = flip;
        match solve_lp(&self.data, &self.lo, &self.hi, None)? {
            LpOutcome::Optimal { objective, .. } => Ok(Some(flip * objective)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Ok(Some(match sense {
                Sense::Maximize => f64::INFINITY,
                Sense::Minimize => f64::NEG_INFINITY,
            })),
        }
    }
}
