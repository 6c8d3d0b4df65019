//! The three verifier queries behind a positive-invariant candidate
//! `Inv = {x : g(x) >= 0}`:
//!
//! 1. closedness under the closed-loop dynamics for every weight vector in
//!    the box (`x in Inv`, successor outside),
//! 2. nonnegativity on the initial set,
//! 3. negativity on the unsafe set.
//!
//! All three are stated as satisfaction problems whose infeasibility proves
//! the property; objectives search for the worst violation so learners get
//! informative counterexamples.

use super::net::{encode_bnn_interval, encode_deterministic_net, NetVars};
use super::{
    interval_layers_of_net, interval_layers_of_policy, propagate_bounds, ActivationBounds,
    BoxSet, EncodeError, Interval, PolyhedronSet,
};
use crate::bnn::BnnPolicy;
use crate::env::Environment;
use crate::milp::{LinExpr, MilpProblem, Relation, Sense, VarId};
use crate::nn::MlpNetwork;

/// A built check with handles for witness extraction. `xp`, `u` and `yp` are
/// populated only by the transition check.
#[derive(Debug)]
pub struct CheckProblem {
    pub problem: MilpProblem,
    pub x: Vec<VarId>,
    pub xp: Vec<VarId>,
    pub u: Vec<VarId>,
    pub y: Option<VarId>,
    pub yp: Option<VarId>,
}

/// Closedness check: maximize `y - y'` subject to `y = g(x) >= 0`,
/// `y' = g(x') <= -delta`, `x' = f(x, u)`, `u` the output of some network in
/// the weight box at `x`, with `x` and `x'` confined to the verification
/// domain. Infeasible means `Inv` is closed under the box dynamics.
///
/// Built in two passes: interval arithmetic supplies the first big-M values,
/// then each ReLU input is tightened against the LP relaxation and the
/// system is re-encoded with the sharper ranges (fewer binaries, tighter
/// relaxation).
pub fn build_check1(
    g: &MlpNetwork,
    policy: &BnnPolicy,
    eps_scale: f64,
    env: &dyn Environment,
    delta_strict: f64,
) -> Result<CheckProblem, EncodeError> {
    let state_box = env.state_box();
    if g.input_dim() != env.state_dim() || policy.input_dim() != env.state_dim() {
        return Err(EncodeError::Dimension {
            expected: env.state_dim(),
            got: g.input_dim(),
        });
    }
    let mut policy_bounds =
        propagate_bounds(&interval_layers_of_policy(policy, eps_scale), state_box);
    let g_base = propagate_bounds(&interval_layers_of_net(g), state_box);
    let mut g_bounds = g_base.clone();
    let mut gp_bounds = g_base;

    let first = build_check1_pass(
        g,
        policy,
        eps_scale,
        env,
        delta_strict,
        &policy_bounds,
        &g_bounds,
        &gp_bounds,
    )?;

    // Optimality-based tightening of every preactivation over the LP
    // relaxation of the full system (sound: the relaxation contains all
    // integer-feasible points). An infeasible relaxation short-circuits:
    // the check is already provably infeasible.
    let mut relax = match first.check.problem.relaxation() {
        Ok(r) => r,
        Err(_) => return Ok(first.check),
    };
    let mut tighten = |vars: &NetVars, bounds: &mut ActivationBounds| -> Result<bool, EncodeError> {
        for (k, layer) in vars.pre.iter().enumerate() {
            for (i, var) in layer.iter().enumerate() {
                let old = bounds.pre[k][i];
                let lo = match relax.extremum(*var, Sense::Minimize).map_err(drop) {
                    Ok(Some(v)) => v,
                    Ok(None) => return Ok(false),
                    Err(()) => old.lo,
                };
                let hi = match relax.extremum(*var, Sense::Maximize).map_err(drop) {
                    Ok(Some(v)) => v,
                    Ok(None) => return Ok(false),
                    Err(()) => old.hi,
                };
                bounds.pre[k][i] = Interval {
                    lo: lo.max(old.lo).min(old.hi),
                    hi: hi.min(old.hi).max(old.lo),
                };
            }
        }
        // Post-ReLU bounds follow from the tightened preactivations.
        for (k, layer) in bounds.pre.clone().iter().enumerate() {
            if k < bounds.post.len() {
                for (i, iv) in layer.iter().enumerate() {
                    bounds.post[k][i] = iv.relu();
                }
            }
        }
        Ok(true)
    };
    if !tighten(&first.policy_vars, &mut policy_bounds)?
        || !tighten(&first.g_vars, &mut g_bounds)?
        || !tighten(&first.gp_vars, &mut gp_bounds)?
    {
        // LP relaxation infeasible: hand back the (infeasible) first pass.
        return Ok(first.check);
    }

    let second = build_check1_pass(
        g,
        policy,
        eps_scale,
        env,
        delta_strict,
        &policy_bounds,
        &g_bounds,
        &gp_bounds,
    )?;
    Ok(second.check)
}

struct Check1Build {
    check: CheckProblem,
    policy_vars: NetVars,
    g_vars: NetVars,
    gp_vars: NetVars,
}

#[allow(clippy::too_many_arguments)]
fn build_check1_pass(
    g: &MlpNetwork,
    policy: &BnnPolicy,
    eps_scale: f64,
    env: &dyn Environment,
    delta_strict: f64,
    policy_bounds: &ActivationBounds,
    g_bounds: &ActivationBounds,
    gp_bounds: &ActivationBounds,
) -> Result<Check1Build, EncodeError> {
    let state_box = env.state_box();
    let mut p = MilpProblem::new();
    let x: Vec<VarId> = (0..env.state_dim())
        .map(|i| p.add_continuous(format!("x{i}"), state_box.lower()[i], state_box.upper()[i]))
        .collect();

    // u = pi_{w,b}(x) for some (w, b) in the weight box; the input-output
    // condition of the feed-forward system is omitted here.
    let policy_vars = encode_bnn_interval(&mut p, policy, eps_scale, &x, policy_bounds, "pol")?;
    let u = policy_vars.output.clone();
    let u_range = policy_bounds.output().to_vec();
    // Policy binaries drive everything downstream; branch on them first.
    for b in policy_vars.binaries.iter().flatten() {
        p.set_branch_priority(*b, 1);
    }

    // x' = f(x, u), then x' in the verification domain.
    let x_range: Vec<_> = state_box
        .lower()
        .iter()
        .zip(state_box.upper())
        .map(|(lo, hi)| Interval { lo: *lo, hi: *hi })
        .collect();
    let xp = env.encode_dynamics(&mut p, &x, &u, &x_range, &u_range);
    for (i, &v) in xp.iter().enumerate() {
        p.add_constraint(LinExpr::term(v, 1.0), Relation::Ge, state_box.lower()[i]);
        p.add_constraint(LinExpr::term(v, 1.0), Relation::Le, state_box.upper()[i]);
    }

    // y = g(x), y' = g(x').
    let g_vars = encode_deterministic_net(&mut p, g, &x, g_bounds, "ginv")?;
    let gp_vars = encode_deterministic_net(&mut p, g, &xp, gp_bounds, "ginvp")?;
    let y = g_vars.output[0];
    let yp = gp_vars.output[0];
    for b in g_vars.binaries.iter().chain(&gp_vars.binaries).flatten() {
        p.set_branch_priority(*b, -1);
    }
    p.add_constraint(LinExpr::term(y, 1.0), Relation::Ge, 0.0);
    p.add_constraint(LinExpr::term(yp, 1.0), Relation::Le, -delta_strict);

    let mut obj = LinExpr::new();
    obj.add(y, 1.0).add(yp, -1.0);
    p.set_objective(Sense::Maximize, obj);
    Ok(Check1Build {
        check: CheckProblem {
            problem: p,
            x,
            xp,
            u,
            y: Some(y),
            yp: Some(yp),
        },
        policy_vars,
        g_vars,
        gp_vars,
    })
}

/// Initial-set check: `x in X0` with `g(x) <= -delta`, maximizing `-g(x)`.
/// Infeasible means `g >= 0` holds on all of X0 (up to the delta margin).
pub fn build_check2(
    g: &MlpNetwork,
    x0: &BoxSet,
    delta_strict: f64,
) -> Result<CheckProblem, EncodeError> {
    if g.input_dim() != x0.dim() {
        return Err(EncodeError::Dimension {
            expected: g.input_dim(),
            got: x0.dim(),
        });
    }
    let mut p = MilpProblem::new();
    let x: Vec<VarId> = (0..x0.dim())
        .map(|i| p.add_continuous(format!("x{i}"), x0.lower()[i], x0.upper()[i]))
        .collect();
    let bounds = propagate_bounds(&interval_layers_of_net(g), x0);
    let g_vars = encode_deterministic_net(&mut p, g, &x, &bounds, "ginv")?;
    let y = g_vars.output[0];
    p.add_constraint(LinExpr::term(y, 1.0), Relation::Le, -delta_strict);
    p.set_objective(Sense::Maximize, LinExpr::term(y, -1.0));
    Ok(CheckProblem {
        problem: p,
        x,
        xp: Vec::new(),
        u: Vec::new(),
        y: Some(y),
        yp: None,
    })
}

/// Unsafe-set check for one disjunct: `x in Xu_disjunct` (within the
/// verification domain) with `g(x) >= 0`, maximizing `g(x)`. Infeasible for
/// every disjunct means `g < 0` throughout the unsafe set.
pub fn build_check3(
    g: &MlpNetwork,
    xu_disjunct: &PolyhedronSet,
    state_box: &BoxSet,
) -> Result<CheckProblem, EncodeError> {
    if g.input_dim() != state_box.dim() {
        return Err(EncodeError::Dimension {
            expected: g.input_dim(),
            got: state_box.dim(),
        });
    }
    let mut p = MilpProblem::new();
    let x: Vec<VarId> = (0..state_box.dim())
        .map(|i| {
            p.add_continuous(
                format!("x{i}"),
                state_box.lower()[i],
                state_box.upper()[i],
            )
        })
        .collect();
    for ineq in &xu_disjunct.ineqs {
        if ineq.coeffs.len() != x.len() {
            return Err(EncodeError::Dimension {
                expected: x.len(),
                got: ineq.coeffs.len(),
            });
        }
        let mut e = LinExpr::new();
        for (v, c) in x.iter().zip(&ineq.coeffs) {
            if *c != 0.0 {
                e.add(*v, *c);
            }
        }
        p.add_constraint(e, Relation::Le, ineq.rhs);
    }
    let bounds = propagate_bounds(&interval_layers_of_net(g), state_box);
    let g_vars = encode_deterministic_net(&mut p, g, &x, &bounds, "ginv")?;
    let y = g_vars.output[0];
    p.add_constraint(LinExpr::term(y, 1.0), Relation::Ge, 0.0);
    p.set_objective(Sense::Maximize, LinExpr::term(y, 1.0));
    Ok(CheckProblem {
        problem: p,
        x,
        xp: Vec::new(),
        u: Vec::new(),
        y: Some(y),
        yp: None,
    })
}
