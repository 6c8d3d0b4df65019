//! The feed-forward reachability system: is there an input in the input set,
//! and a weight vector in the interval weight set, whose network output lands
//! in the unsafe output set?
//!
//! Unsatisfiability of this system over every unsafe-set disjunct certifies
//! that every network in the weight box is safe.

use super::net::encode_bnn_interval;
use super::{
    interval_layers_of_policy, propagate_bounds, BoxSet, EncodeError, NetVars, PolyhedronSet,
};
use crate::bnn::BnnPolicy;
use crate::milp::{LinExpr, MilpProblem, Relation, Sense};

/// Input region: an axis-aligned box, or a polytope carried inside an
/// explicit bounding box (the MILP path requires bounded inputs).
#[derive(Debug, Clone)]
pub enum InputSet {
    Box(BoxSet),
    Polytope { bounds: BoxSet, poly: PolyhedronSet },
}

impl InputSet {
    pub fn bounding_box(&self) -> &BoxSet {
        match self {
            InputSet::Box(b) => b,
            InputSet::Polytope { bounds, .. } => bounds,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            InputSet::Box(b) => b.contains(x),
            InputSet::Polytope { bounds, poly } => bounds.contains(x) && poly.contains(x),
        }
    }

    pub fn dim(&self) -> usize {
        self.bounding_box().dim()
    }
}

/// A built reachability query with handles for witness extraction.
#[derive(Debug)]
pub struct PhiProblem {
    pub problem: MilpProblem,
    pub vars: NetVars,
}

/// Conjoins input membership, the BNN interval encoding, and one unsafe
/// output disjunct. Feasibility problem (objective 0); solve once per
/// disjunct of the unsafe set to answer the full query.
pub fn build_phi(
    policy: &BnnPolicy,
    x0: &InputSet,
    xu_disjunct: &PolyhedronSet,
    eps_scale: f64,
) -> Result<PhiProblem, EncodeError> {
    if !eps_scale.is_finite() || eps_scale < 0.0 {
        return Err(EncodeError::BadInterval {
            lo: eps_scale,
            hi: eps_scale,
        });
    }
    if x0.dim() != policy.input_dim() {
        return Err(EncodeError::Dimension {
            expected: policy.input_dim(),
            got: x0.dim(),
        });
    }
    let bb = x0.bounding_box();
    let mut p = MilpProblem::new();
    let bounds = propagate_bounds(&interval_layers_of_policy(policy, eps_scale), bb);
    let input_vars: Vec<_> = (0..bb.dim())
        .map(|i| p.add_continuous(format!("x0_{i}"), bb.lower()[i], bb.upper()[i]))
        .collect();
    if let InputSet::Polytope { poly, .. } = x0 {
        for ineq in &poly.ineqs {
            if ineq.coeffs.len() != input_vars.len() {
                return Err(EncodeError::Dimension {
                    expected: input_vars.len(),
                    got: ineq.coeffs.len(),
                });
            }
            let mut e = LinExpr::new();
            for (v, c) in input_vars.iter().zip(&ineq.coeffs) {
                if *c != 0.0 {
                    e.add(*v, *c);
                }
            }
            p.add_constraint(e, Relation::Le, ineq.rhs);
        }
    }
    let vars = encode_bnn_interval(&mut p, policy, eps_scale, &input_vars, &bounds, "phi")?;
    for ineq in &xu_disjunct.ineqs {
        if ineq.coeffs.len() != vars.output.len() {
            return Err(EncodeError::Dimension {
                expected: vars.output.len(),
                got: ineq.coeffs.len(),
            });
        }
        let mut e = LinExpr::new();
        for (v, c) in vars.output.iter().zip(&ineq.coeffs) {
            if *c != 0.0 {
                e.add(*v, *c);
            }
        }
        p.add_constraint(e, Relation::Le, ineq.rhs);
    }
    p.set_objective(Sense::Maximize, LinExpr::new());
    Ok(PhiProblem { problem: p, vars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::BnnLayer;
    use crate::milp::MilpVerdict;
    use crate::nn::{DenseMatrix, MlpNetwork};
    use std::time::Duration;

    fn limit() -> Duration {
        Duration::from_secs(30)
    }

    fn mean_only_policy(net: &MlpNetwork) -> BnnPolicy {
        let layers = net
            .layers()
            .iter()
            .map(|l| BnnLayer {
                weight_mean: l.weight.clone(),
                weight_std: DenseMatrix::zeros(l.weight.rows(), l.weight.cols()),
                bias_mean: l.bias.clone(),
                bias_std: vec![0.0; l.bias.len()],
                bayesian: false,
            })
            .collect();
        BnnPolicy::new(layers).unwrap()
    }

    /// Unsafe set `{y : y >= t}` on a scalar output.
    fn output_above(t: f64) -> PolyhedronSet {
        PolyhedronSet::half_space_ge(vec![1.0], t).unwrap()
    }

    #[test]
    fn grid_safe_threshold_is_infeasible() {
        let net = MlpNetwork::random(&[1, 2, 1], 4).unwrap();
        let policy = mean_only_policy(&net);
        let x0 = InputSet::Box(BoxSet::new(vec![0.0], vec![1.0]).unwrap());
        // Grid maximum of the mean network over X0.
        let mut max_out = f64::NEG_INFINITY;
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            max_out = max_out.max(net.forward(&[x]).unwrap()[0]);
        }
        let phi = build_phi(&policy, &x0, &output_above(max_out + 1.0), 0.0).unwrap();
        assert!(phi.problem.solve(limit()).unwrap().is_infeasible());
    }

    #[test]
    fn reachable_threshold_produces_valid_witness() {
        let net = MlpNetwork::random(&[1, 2, 1], 4).unwrap();
        let policy = mean_only_policy(&net);
        let x0 = InputSet::Box(BoxSet::new(vec![0.0], vec![1.0]).unwrap());
        let mut max_out = f64::NEG_INFINITY;
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            max_out = max_out.max(net.forward(&[x]).unwrap()[0]);
        }
        let threshold = max_out - 0.05;
        let phi = build_phi(&policy, &x0, &output_above(threshold), 0.0).unwrap();
        match phi.problem.solve(limit()).unwrap() {
            MilpVerdict::Optimal(s) => {
                let x_w = s.value(phi.vars.input[0]);
                assert!(x0.contains(&[x_w]));
                // Replay through the mean network: lands in Xu within 1e-5.
                let y = net.forward(&[x_w]).unwrap()[0];
                assert!(y >= threshold - 1e-5, "replayed output {y} < {threshold}");
                let (ok, worst) = phi.problem.check_feasible(&s.values);
                assert!(ok, "witness residual {worst}");
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn interval_bound_domination_is_infeasible() {
        let net = MlpNetwork::random(&[2, 3, 1], 8).unwrap();
        let policy = mean_only_policy(&net);
        let bb = BoxSet::centered(2, 1.0).unwrap();
        let bounds = propagate_bounds(&interval_layers_of_policy(&policy, 0.0), &bb);
        let above = bounds.output()[0].hi + 0.5;
        let phi = build_phi(
            &policy,
            &InputSet::Box(bb),
            &output_above(above),
            0.0,
        )
        .unwrap();
        assert!(phi.problem.solve(limit()).unwrap().is_infeasible());
    }

    #[test]
    fn feasibility_monotone_in_eps() {
        // If Phi is feasible at eps1, it stays feasible at eps2 >= eps1.
        let net = MlpNetwork::random(&[2, 3, 1], 15).unwrap();
        let layers = net
            .layers()
            .iter()
            .map(|l| BnnLayer {
                weight_mean: l.weight.clone(),
                weight_std: DenseMatrix::from_fn(l.weight.rows(), l.weight.cols(), |_, _| 0.05),
                bias_mean: l.bias.clone(),
                bias_std: vec![0.05; l.bias.len()],
                bayesian: true,
            })
            .collect();
        let policy = BnnPolicy::new(layers).unwrap();
        let x0 = InputSet::Box(BoxSet::centered(2, 1.0).unwrap());
        // Pick a threshold right at the mean network's reachable maximum so
        // small eps already reaches it.
        let mut max_out = f64::NEG_INFINITY;
        for i in 0..60 {
            for j in 0..60 {
                let x = [-1.0 + 2.0 * i as f64 / 59.0, -1.0 + 2.0 * j as f64 / 59.0];
                max_out = max_out.max(net.forward(&x).unwrap()[0]);
            }
        }
        let xu = output_above(max_out - 1e-3);
        let mut feasible_at = Vec::new();
        for eps in [0.5, 1.0, 2.0] {
            let phi = build_phi(&policy, &x0, &xu, eps).unwrap();
            let feas = !phi.problem.solve(limit()).unwrap().is_infeasible();
            feasible_at.push(feas);
        }
        assert!(feasible_at[0], "base level should be feasible");
        assert!(
            feasible_at.windows(2).all(|w| !w[0] || w[1]),
            "feasibility must be monotone: {feasible_at:?}"
        );
    }
}
