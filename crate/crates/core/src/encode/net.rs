//! Exact MILP encodings of deterministic networks and interval encodings of
//! BNN weight boxes.

use super::bounds::{interval_layers_of_net, interval_layers_of_policy, propagate_bounds};
use super::relu::relu_output;
use super::{ActivationBounds, BoxSet, EncodeError, Interval, BOUND_PAD};
use crate::bnn::BnnPolicy;
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};
use crate::nn::MlpNetwork;

/// Variable handles of one encoded network.
#[derive(Debug, Clone)]
pub struct NetVars {
    pub input: Vec<VarId>,
    /// Preactivation variables per layer; the last entry aliases `output`.
    pub pre: Vec<Vec<VarId>>,
    /// Post-ReLU variables per hidden layer.
    pub post: Vec<Vec<VarId>>,
    pub output: Vec<VarId>,
    /// ReLU indicator binaries for hidden neurons, `None` where sign-fixed.
    pub binaries: Vec<Option<VarId>>,
    /// Positive/negative input splits (BNN interval encoding only).
    pub input_pos: Vec<VarId>,
    pub input_neg: Vec<VarId>,
}

fn add_interval_var(p: &mut MilpProblem, name: String, iv: Interval) -> VarId {
    p.add_continuous(name, iv.lo - BOUND_PAD, iv.hi + BOUND_PAD)
}

/// Emits the exact constraint graph of a deterministic ReLU network over
/// `input_vars`: feasible assignments project exactly onto
/// `{(x, net(x))}` for inputs in the region `bounds` was computed on.
pub fn encode_deterministic_net(
    p: &mut MilpProblem,
    net: &MlpNetwork,
    input_vars: &[VarId],
    bounds: &ActivationBounds,
    prefix: &str,
) -> Result<NetVars, EncodeError> {
    if input_vars.len() != net.input_dim() {
        return Err(EncodeError::Dimension {
            expected: net.input_dim(),
            got: input_vars.len(),
        });
    }
    let last = net.layers().len() - 1;
    let mut pre_vars = Vec::with_capacity(net.layers().len());
    let mut post_vars = Vec::new();
    let mut binaries = Vec::new();
    let mut act: Vec<VarId> = input_vars.to_vec();

    for (k, layer) in net.layers().iter().enumerate() {
        let rows = layer.weight.rows();
        let mut z_vars = Vec::with_capacity(rows);
        for i in 0..rows {
            let z = add_interval_var(p, format!("{prefix}_pre{k}_{i}"), bounds.pre[k][i]);
            // z - sum_j w_ij * a_j = b_i
            let mut e = LinExpr::term(z, 1.0);
            for (j, &a) in act.iter().enumerate() {
                let w = layer.weight.get(i, j);
                if w != 0.0 {
                    e.add(a, -w);
                }
            }
            p.add_constraint(e, Relation::Eq, layer.bias[i]);
            z_vars.push(z);
        }
        if k < last {
            let mut a_vars = Vec::with_capacity(rows);
            for (i, &z) in z_vars.iter().enumerate() {
                let g = relu_output(p, z, bounds.pre[k][i], &format!("{prefix}_post{k}_{i}"));
                binaries.push(g.binary);
                a_vars.push(g.out);
            }
            post_vars.push(a_vars.clone());
            act = a_vars;
        } else {
            act = z_vars.clone();
        }
        pre_vars.push(z_vars);
    }

    Ok(NetVars {
        input: input_vars.to_vec(),
        output: act,
        pre: pre_vars,
        post: post_vars,
        binaries,
        input_pos: Vec::new(),
        input_neg: Vec::new(),
    })
}

/// Convenience wrapper: fresh input variables over `input_box`, bounds from
/// interval propagation, then [`encode_deterministic_net`].
pub fn encode_net_over_box(
    p: &mut MilpProblem,
    net: &MlpNetwork,
    input_box: &BoxSet,
    prefix: &str,
) -> Result<(NetVars, ActivationBounds), EncodeError> {
    let bounds = propagate_bounds(&interval_layers_of_net(net), input_box);
    let input_vars: Vec<VarId> = (0..input_box.dim())
        .map(|i| p.add_continuous(format!("{prefix}_x{i}"), input_box.lower()[i], input_box.upper()[i]))
        .collect();
    let vars = encode_deterministic_net(p, net, &input_vars, &bounds, prefix)?;
    Ok((vars, bounds))
}

/// Encodes every network in the weight box at once: feasible output values at
/// a fixed input are exactly those reachable by some weight vector in the
/// box.
///
/// Hidden-to-hidden layers use the two-sided interval inequalities valid for
/// nonnegative layer inputs. The input layer splits `x = x_pos + x_neg` with
/// `x_pos = ReLU(x)` (one gadget per input dimension) so the sign of each
/// input coordinate selects which interval endpoint binds. The final layer is
/// affine.
pub fn encode_bnn_interval(
    p: &mut MilpProblem,
    policy: &BnnPolicy,
    eps_scale: f64,
    input_vars: &[VarId],
    bounds: &ActivationBounds,
    prefix: &str,
) -> Result<NetVars, EncodeError> {
    if input_vars.len() != policy.input_dim() {
        return Err(EncodeError::Dimension {
            expected: policy.input_dim(),
            got: input_vars.len(),
        });
    }
    let layers = policy.layers();
    let last = layers.len() - 1;
    let mut pre_vars: Vec<Vec<VarId>> = Vec::with_capacity(layers.len());
    let mut post_vars: Vec<Vec<VarId>> = Vec::new();
    let mut binaries: Vec<Option<VarId>> = Vec::new();

    // Input split: x_pos = ReLU(x), x_neg = x - x_pos.
    let mut input_pos = Vec::with_capacity(input_vars.len());
    let mut input_neg = Vec::with_capacity(input_vars.len());
    for (i, &x) in input_vars.iter().enumerate() {
        let iv = bounds.input[i];
        let g = relu_output(p, x, iv, &format!("{prefix}_inpos{i}"));
        binaries.push(g.binary);
        let neg = p.add_continuous(
            format!("{prefix}_inneg{i}"),
            iv.lo.min(0.0) - BOUND_PAD,
            iv.hi.min(0.0) + BOUND_PAD,
        );
        let mut e = LinExpr::new();
        e.add(neg, 1.0).add(x, -1.0).add(g.out, 1.0);
        p.add_constraint(e, Relation::Eq, 0.0);
        input_pos.push(g.out);
        input_neg.push(neg);
    }

    let mut act: Vec<VarId> = Vec::new(); // previous post-ReLU layer (k >= 1)
    for (k, layer) in layers.iter().enumerate() {
        let rows = layer.weight_mean.rows();
        let cols = layer.weight_mean.cols();
        let mut z_vars = Vec::with_capacity(rows);
        for i in 0..rows {
            let z = add_interval_var(p, format!("{prefix}_pre{k}_{i}"), bounds.pre[k][i]);
            let b_mu = layer.bias_mean[i];
            let b_e = eps_scale * layer.bias_std[i];
            let mut row_zero_width = b_e == 0.0;
            let mut mu = Vec::with_capacity(cols);
            let mut hw = Vec::with_capacity(cols);
            for j in 0..cols {
                let m = layer.weight_mean.get(i, j);
                let e = eps_scale * layer.weight_std.get(i, j);
                row_zero_width &= e == 0.0;
                mu.push(m);
                hw.push(e);
            }
            if k == 0 {
                if row_zero_width {
                    // Degenerate row: z = M x + m exactly.
                    let mut e = LinExpr::term(z, 1.0);
                    for (j, &x) in input_vars.iter().enumerate() {
                        if mu[j] != 0.0 {
                            e.add(x, -mu[j]);
                        }
                    }
                    p.add_constraint(e, Relation::Eq, b_mu);
                } else {
                    // (M-E) x_pos + (M+E) x_neg + (m-e) <= z
                    let mut lo_e = LinExpr::term(z, 1.0);
                    for j in 0..cols {
                        lo_e.add(input_pos[j], -(mu[j] - hw[j]));
                        lo_e.add(input_neg[j], -(mu[j] + hw[j]));
                    }
                    p.add_constraint(lo_e, Relation::Ge, b_mu - b_e);
                    // z <= (M+E) x_pos + (M-E) x_neg + (m+e)
                    let mut hi_e = LinExpr::term(z, 1.0);
                    for j in 0..cols {
                        hi_e.add(input_pos[j], -(mu[j] + hw[j]));
                        hi_e.add(input_neg[j], -(mu[j] - hw[j]));
                    }
                    p.add_constraint(hi_e, Relation::Le, b_mu + b_e);
                }
            } else if row_zero_width {
                let mut e = LinExpr::term(z, 1.0);
                for (j, &a) in act.iter().enumerate() {
                    if mu[j] != 0.0 {
                        e.add(a, -mu[j]);
                    }
                }
                p.add_constraint(e, Relation::Eq, b_mu);
            } else {
                // (M-E) h + (m-e) <= z <= (M+E) h + (m+e), valid since h >= 0.
                let mut lo_e = LinExpr::term(z, 1.0);
                for (j, &a) in act.iter().enumerate() {
                    lo_e.add(a, -(mu[j] - hw[j]));
                }
                p.add_constraint(lo_e, Relation::Ge, b_mu - b_e);
                let mut hi_e = LinExpr::term(z, 1.0);
                for (j, &a) in act.iter().enumerate() {
                    hi_e.add(a, -(mu[j] + hw[j]));
                }
                p.add_constraint(hi_e, Relation::Le, b_mu + b_e);
            }
            z_vars.push(z);
        }
        if k < last {
            let mut a_vars = Vec::with_capacity(rows);
            for (i, &z) in z_vars.iter().enumerate() {
                let g = relu_output(p, z, bounds.pre[k][i], &format!("{prefix}_post{k}_{i}"));
                binaries.push(g.binary);
                a_vars.push(g.out);
            }
            post_vars.push(a_vars.clone());
            act = a_vars;
        } else {
            act = z_vars.clone();
        }
        pre_vars.push(z_vars);
    }

    Ok(NetVars {
        input: input_vars.to_vec(),
        output: act,
        pre: pre_vars,
        post: post_vars,
        binaries,
        input_pos,
        input_neg,
    })
}

/// Fresh input variables plus the full BNN interval encoding over a box.
pub fn encode_policy_over_box(
    p: &mut MilpProblem,
    policy: &BnnPolicy,
    eps_scale: f64,
    input_box: &BoxSet,
    prefix: &str,
) -> Result<(NetVars, ActivationBounds), EncodeError> {
    let bounds = propagate_bounds(&interval_layers_of_policy(policy, eps_scale), input_box);
    let input_vars: Vec<VarId> = (0..input_box.dim())
        .map(|i| p.add_continuous(format!("{prefix}_x{i}"), input_box.lower()[i], input_box.upper()[i]))
        .collect();
    let vars = encode_bnn_interval(p, policy, eps_scale, &input_vars, &bounds, prefix)?;
    Ok((vars, bounds))
}
