//! One-dimensional affine test system `x' = clip(gain * x + offset +
//! action_coeff * u)`.
//!
//! Small enough that invariants can be written down by hand, which makes it
//! the reference fixture for the verifier checks and the certification loop.

use super::{clip, ActionSpace, Environment};
use crate::encode::{encode_clip, BoxSet, DisjunctiveSet, Interval};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};

#[derive(Debug, Clone)]
pub struct Affine1d {
    name: String,
    pub gain: f64,
    pub offset: f64,
    pub action_coeff: f64,
    pub clip_z: Option<f64>,
    state_box: BoxSet,
    initial: BoxSet,
    unsafe_set: DisjunctiveSet,
    unsafe_threshold: f64,
}

impl Affine1d {
    pub fn new(
        name: impl Into<String>,
        gain: f64,
        offset: f64,
        action_coeff: f64,
        clip_z: Option<f64>,
        initial: (f64, f64),
        unsafe_threshold: f64,
        state_bound: f64,
    ) -> Self {
        Self {
            name: name.into(),
            gain,
            offset,
            action_coeff,
            clip_z,
            state_box: BoxSet::centered(1, state_bound).expect("toy box"),
            initial: BoxSet::new(vec![initial.0], vec![initial.1]).expect("toy box"),
            unsafe_set: DisjunctiveSet::outside_sup_ball(1, unsafe_threshold),
            unsafe_threshold,
        }
    }

    /// Contracting system `x' = clip_{+-1}(0.5 x)` with X0 = [-0.1, 0.1] and
    /// unsafe `|x| >= 1`; `[-1 + d, 1 - d]` is a positive invariant for any
    /// small d > 0. The action has no effect.
    pub fn stable() -> Self {
        Self::new("toy-stable", 0.5, 0.0, 0.0, Some(1.0), (-0.1, 0.1), 1.0, 1.5)
    }

    /// Frozen dynamics `x' = x` (action ignored).
    pub fn frozen() -> Self {
        Self::new("toy-frozen", 1.0, 0.0, 0.0, None, (-0.1, 0.1), 1.0, 1.5)
    }

    /// Drifting dynamics `x' = x - 1` (action ignored).
    pub fn shift_down() -> Self {
        Self::new("toy-shift", 1.0, -1.0, 0.0, None, (-0.1, 0.1), 1.0, 1.5)
    }
}

impl Environment for Affine1d {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn policy_output_dim(&self) -> usize {
        1
    }

    fn state_box(&self) -> &BoxSet {
        &self.state_box
    }

    fn initial_set(&self) -> &BoxSet {
        &self.initial
    }

    fn unsafe_set(&self) -> &DisjunctiveSet {
        &self.unsafe_set
    }

    fn is_unsafe(&self, state: &[f64]) -> bool {
        state[0].abs() >= self.unsafe_threshold
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { dim: 1 }
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let pre = self.gain * state[0] + self.offset + self.action_coeff * action[0];
        vec![match self.clip_z {
            Some(z) => clip(pre, z),
            None => pre,
        }]
    }

    fn reward(&self, state: &[f64], _action: &[f64]) -> f64 {
        -state[0] * state[0]
    }

    fn encode_dynamics(
        &self,
        p: &mut MilpProblem,
        x: &[VarId],
        u: &[VarId],
        x_range: &[Interval],
        u_range: &[Interval],
    ) -> Vec<VarId> {
        let pre_range = Interval {
            lo: (self.gain * x_range[0].lo).min(self.gain * x_range[0].hi)
                + self.offset
                + (self.action_coeff * u_range[0].lo).min(self.action_coeff * u_range[0].hi),
            hi: (self.gain * x_range[0].lo).max(self.gain * x_range[0].hi)
                + self.offset
                + (self.action_coeff * u_range[0].lo).max(self.action_coeff * u_range[0].hi),
        };
        let pre = p.add_continuous("toy_pre", pre_range.lo - 1e-9, pre_range.hi + 1e-9);
        let mut e = LinExpr::new();
        e.add(pre, 1.0).add(x[0], -self.gain);
        if self.action_coeff != 0.0 {
            e.add(u[0], -self.action_coeff);
        }
        p.add_constraint(e, Relation::Eq, self.offset);
        match self.clip_z {
            Some(z) => vec![encode_clip(p, pre, z, pre_range, "toy")],
            None => vec![pre],
        }
    }
}
