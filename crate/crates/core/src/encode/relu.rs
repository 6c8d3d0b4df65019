//! Big-M ReLU and clip gadgets.

use super::{Interval, BOUND_PAD};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};

/// Result of emitting one ReLU relation.
#[derive(Debug, Clone, Copy)]
pub struct ReluGadget {
    pub out: VarId,
    /// Activation indicator; `None` when the neuron's sign is fixed by its
    /// bounds and no binary was needed.
    pub binary: Option<VarId>,
}

/// Ties `out_var = ReLU(in_var)` given a valid input range.
///
/// - `range.hi <= 0`: the neuron is dead, `out = 0`, no binary;
/// - `range.lo >= 0`: the neuron is always active, `out = in`, no binary;
/// - otherwise the standard four-constraint big-M gadget with an indicator
///   binary `z`: `out >= in`, `out >= 0` (bound), `out <= in - lo*(1-z)`,
///   `out <= hi*z`.
///
/// The caller owns `out_var` and its bounds; big-M constants come straight
/// from `range`, which must cover every feasible value of `in_var`.
pub fn encode_relu(
    p: &mut MilpProblem,
    in_var: VarId,
    out_var: VarId,
    range: Interval,
    name: &str,
) -> Option<VarId> {
    assert!(range.lo <= range.hi, "invalid relu range");
    let (lo, hi) = (range.lo - BOUND_PAD, range.hi + BOUND_PAD);
    if hi <= 0.0 {
        p.add_constraint(LinExpr::term(out_var, 1.0), Relation::Eq, 0.0);
        return None;
    }
    if lo >= 0.0 {
        let mut e = LinExpr::new();
        e.add(out_var, 1.0).add(in_var, -1.0);
        p.add_constraint(e, Relation::Eq, 0.0);
        return None;
    }
    let z = p.add_binary(format!("{name}_z"));
    // out >= in
    let mut e = LinExpr::new();
    e.add(out_var, 1.0).add(in_var, -1.0);
    p.add_constraint(e, Relation::Ge, 0.0);
    // out >= 0
    p.add_constraint(LinExpr::term(out_var, 1.0), Relation::Ge, 0.0);
    // out <= in - lo*(1-z)  <=>  out - in - lo*z <= -lo
    let mut e = LinExpr::new();
    e.add(out_var, 1.0).add(in_var, -1.0).add(z, -lo);
    p.add_constraint(e, Relation::Le, -lo);
    // out <= hi*z
    let mut e = LinExpr::new();
    e.add(out_var, 1.0).add(z, -hi);
    p.add_constraint(e, Relation::Le, 0.0);
    Some(z)
}

/// Creates the output variable for a ReLU over `range` and emits the gadget.
pub(crate) fn relu_output(
    p: &mut MilpProblem,
    in_var: VarId,
    range: Interval,
    name: &str,
) -> ReluGadget {
    let out = p.add_continuous(
        name,
        range.lo.max(0.0) - BOUND_PAD,
        range.hi.max(0.0) + BOUND_PAD,
    );
    let binary = encode_relu(p, in_var, out, range, name);
    ReluGadget { out, binary }
}

/// Encodes `out = clip_{+-z}(x) = x - ReLU(x - z) + ReLU(-x - z)` with two
/// ReLU gadgets (at most two binaries; none when the range is sign-fixed).
/// Returns the clipped output variable.
pub fn encode_clip(
    p: &mut MilpProblem,
    x: VarId,
    z: f64,
    x_range: Interval,
    name: &str,
) -> VarId {
    assert!(z > 0.0, "clip threshold must be positive");
    // a = x - z
    let a_range = Interval {
        lo: x_range.lo - z,
        hi: x_range.hi - z,
    };
    let a = p.add_continuous(
        format!("{name}_over"),
        a_range.lo - BOUND_PAD,
        a_range.hi + BOUND_PAD,
    );
    let mut e = LinExpr::new();
    e.add(a, 1.0).add(x, -1.0);
    p.add_constraint(e, Relation::Eq, -z);
    let r_over = relu_output(p, a, a_range, &format!("{name}_ro"));

    // b = -x - z
    let b_range = Interval {
        lo: -x_range.hi - z,
        hi: -x_range.lo - z,
    };
    let b = p.add_continuous(
        format!("{name}_under"),
        b_range.lo - BOUND_PAD,
        b_range.hi + BOUND_PAD,
    );
    let mut e = LinExpr::new();
    e.add(b, 1.0).add(x, 1.0);
    p.add_constraint(e, Relation::Eq, -z);
    let r_under = relu_output(p, b, b_range, &format!("{name}_ru"));

    let out = p.add_continuous(
        format!("{name}_clip"),
        x_range.lo.clamp(-z, z) - BOUND_PAD,
        x_range.hi.clamp(-z, z) + BOUND_PAD,
    );
    // out = x - r_over + r_under
    let mut e = LinExpr::new();
    e.add(out, 1.0)
        .add(x, -1.0)
        .add(r_over.out, 1.0)
        .add(r_under.out, -1.0);
    p.add_constraint(e, Relation::Eq, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpVerdict, Sense};
    use std::time::Duration;

    fn limit() -> Duration {
        Duration::from_secs(10)
    }

    /// Builds a problem with `in` fixed at `x`, returns the set of feasible
    /// outputs found by minimizing and maximizing.
    fn relu_envelope(x: f64, lo: f64, hi: f64) -> (f64, f64) {
        let mut lo_out = f64::NAN;
        let mut hi_out = f64::NAN;
        for (slot, sense) in [(&mut lo_out, Sense::Minimize), (&mut hi_out, Sense::Maximize)] {
            let mut p = MilpProblem::new();
            let iv = p.add_continuous("in", x, x);
            let ov = p.add_continuous("out", -10.0, 10.0);
            encode_relu(&mut p, iv, ov, Interval { lo, hi }, "n");
            p.set_objective(sense, LinExpr::term(ov, 1.0));
            match p.solve(limit()).unwrap() {
                MilpVerdict::Optimal(s) => *slot = s.objective,
                other => panic!("{other:?}"),
            }
        }
        (lo_out, hi_out)
    }

    #[test]
    fn active_input_forces_identity() {
        let (lo, hi) = relu_envelope(0.5, -1.0, 1.0);
        assert!((lo - 0.5).abs() < 1e-6);
        assert!((hi - 0.5).abs() < 1e-6);
    }

    #[test]
    fn inactive_input_forces_zero() {
        let (lo, hi) = relu_envelope(-0.5, -1.0, 1.0);
        assert!(lo.abs() < 1e-6);
        assert!(hi.abs() < 1e-6);
    }

    #[test]
    fn dead_neuron_no_binary() {
        let mut p = MilpProblem::new();
        let iv = p.add_continuous("in", -1.0, -0.2);
        let ov = p.add_continuous("out", -10.0, 10.0);
        let z = encode_relu(&mut p, iv, ov, Interval { lo: -1.0, hi: -0.2 }, "n");
        assert!(z.is_none());
        p.set_objective(Sense::Maximize, LinExpr::term(ov, 1.0));
        let s = p.solve(limit()).unwrap().optimal().unwrap().clone();
        assert!(s.objective.abs() < 1e-6);
    }

    #[test]
    fn clip_gadget_unique_output() {
        // x fixed to 1.7, z = 1 -> only feasible output is 1.0.
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 1.7, 1.7);
        let out = encode_clip(&mut p, x, 1.0, Interval { lo: -3.0, hi: 3.0 }, "c");
        for sense in [Sense::Minimize, Sense::Maximize] {
            p.set_objective(sense, LinExpr::term(out, 1.0));
            let s = p.solve(limit()).unwrap().optimal().unwrap().clone();
            assert!((s.objective - 1.0).abs() < 1e-6, "{}", s.objective);
        }
    }

    #[test]
    fn clip_identity_inside_band() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.5, 0.5);
        let out = encode_clip(&mut p, x, 1.0, Interval { lo: -3.0, hi: 3.0 }, "c");
        p.set_objective(Sense::Maximize, LinExpr::term(out, 1.0));
        let s = p.solve(limit()).unwrap().optimal().unwrap().clone();
        assert!((s.objective - 0.5).abs() < 1e-6);
    }
}
