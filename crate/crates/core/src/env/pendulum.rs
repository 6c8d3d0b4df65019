//! Inverted pendulum with piecewise-linear trigonometry.
//!
//! State `(theta, theta_dot)`, scalar torque `u`:
//!
//! ```text
//! theta_dot' = clip_{+-8}(theta_dot - (3g/(2l)) * angular(theta + pi)
//!                          + dt * 7.5 * clip_{+-1}(u) / (m l^2))
//! theta'     = theta + theta_dot' * dt
//! ```
//!
//! with g = 9.81, l = 1, dt = 0.05, m = 0.8. Over the verification domain
//! `theta in [-1, 1]` the shifted angle stays inside one linear piece of
//! `angular`, but the encoding handles the general V-shaped window
//! `angular(s) = -1 + (2/pi) |s - 3pi/2|` with a single ReLU gadget.

use super::{angular, clip, ActionSpace, Environment};
use crate::encode::{encode_clip, BoxSet, DisjunctiveSet, EncodeError, Interval, LinearIneq,
    PolyhedronSet};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};
use std::f64::consts::PI;

const GRAVITY: f64 = 9.81;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MASS: f64 = 0.8;
/// `-3 g / (2 l)`.
const ANGULAR_GAIN: f64 = -3.0 * GRAVITY / (2.0 * LENGTH);
/// `dt * 7.5 / (m l^2)`.
const TORQUE_GAIN: f64 = DT * 7.5 / (MASS * LENGTH * LENGTH);
const SPEED_CLIP: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct Pendulum {
    state_box: BoxSet,
    initial: BoxSet,
    unsafe_set: DisjunctiveSet,
}

impl Pendulum {
    pub const THETA_UNSAFE: f64 = 0.9;
    pub const SPEED_UNSAFE: f64 = 2.0;

    pub fn new() -> Self {
        // One half-space disjunct per violated threshold.
        let disjuncts = vec![
            PolyhedronSet::new(vec![LinearIneq {
                coeffs: vec![-1.0, 0.0],
                rhs: -Self::THETA_UNSAFE,
            }]), // theta >= 0.9
            PolyhedronSet::new(vec![LinearIneq {
                coeffs: vec![1.0, 0.0],
                rhs: -Self::THETA_UNSAFE,
            }]), // theta <= -0.9
            PolyhedronSet::new(vec![LinearIneq {
                coeffs: vec![0.0, -1.0],
                rhs: -Self::SPEED_UNSAFE,
            }]), // theta_dot >= 2
            PolyhedronSet::new(vec![LinearIneq {
                coeffs: vec![0.0, 1.0],
                rhs: -Self::SPEED_UNSAFE,
            }]), // theta_dot <= -2
        ];
        Self {
            state_box: BoxSet::new(vec![-1.0, -2.2], vec![1.0, 2.2]).expect("static box"),
            initial: BoxSet::new(vec![-PI / 6.0, -0.2], vec![PI / 6.0, 0.2]).expect("static box"),
            unsafe_set: DisjunctiveSet::new(disjuncts),
        }
    }

    fn speed_update(&self, theta: f64, theta_dot: f64, u: f64) -> f64 {
        clip(
            theta_dot + ANGULAR_GAIN * angular(theta + PI) + TORQUE_GAIN * clip(u, 1.0),
            SPEED_CLIP,
        )
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

/// Emits `out = angular(s)` for an affine angle expression `s = x + shift`,
/// where `x` is a variable with range `x_range`. The whole shifted window
/// must fit inside `(pi/2, 5*pi/2]` after one multiple-of-2pi adjustment.
pub(crate) fn encode_angular(
    p: &mut MilpProblem,
    x: VarId,
    shift: f64,
    x_range: Interval,
    name: &str,
) -> Result<(VarId, Interval), EncodeError> {
    let s_lo = x_range.lo + shift;
    let s_hi = x_range.hi + shift;
    // Find the unique k with pi/2 < s - 2 pi k <= 5 pi / 2 for the whole
    // window.
    let two_pi = 2.0 * PI;
    let k = ((s_hi - 5.0 * PI / 2.0) / two_pi).ceil();
    let w_lo = s_lo - two_pi * k;
    let w_hi = s_hi - two_pi * k;
    if !(w_lo > PI / 2.0 - 1e-12 && w_hi <= 5.0 * PI / 2.0 + 1e-12) {
        return Err(EncodeError::AngleWindow { lo: w_lo, hi: w_hi });
    }
    // v = s - 2 pi k - 3 pi / 2; angular = -1 + (2/pi)(v + 2 ReLU(-v)).
    let offset = shift - two_pi * k - 1.5 * PI;
    let v_range = Interval {
        lo: x_range.lo + offset,
        hi: x_range.hi + offset,
    };
    let v = p.add_continuous(format!("{name}_v"), v_range.lo - 1e-9, v_range.hi + 1e-9);
    let mut e = LinExpr::new();
    e.add(v, 1.0).add(x, -1.0);
    p.add_constraint(e, Relation::Eq, offset);

    let nv_range = Interval {
        lo: -v_range.hi,
        hi: -v_range.lo,
    };
    let nv = p.add_continuous(format!("{name}_nv"), nv_range.lo - 1e-9, nv_range.hi + 1e-9);
    let mut e = LinExpr::new();
    e.add(nv, 1.0).add(v, 1.0);
    p.add_constraint(e, Relation::Eq, 0.0);
    let relu = crate::encode::relu_output(p, nv, nv_range, &format!("{name}_r")).out;

    let abs_hi = v_range.lo.abs().max(v_range.hi.abs());
    let abs_lo = if v_range.contains(0.0) {
        0.0
    } else {
        v_range.lo.abs().min(v_range.hi.abs())
    };
    let out_range = Interval {
        lo: -1.0 + (2.0 / PI) * abs_lo,
        hi: -1.0 + (2.0 / PI) * abs_hi,
    };
    let out = p.add_continuous(
        format!("{name}_ang"),
        out_range.lo - 1e-9,
        out_range.hi + 1e-9,
    );
    // out - (2/pi) v - (4/pi) relu = -1
    let mut e = LinExpr::new();
    e.add(out, 1.0)
        .add(v, -2.0 / PI)
        .add(relu, -4.0 / PI);
    p.add_constraint(e, Relation::Eq, -1.0);
    Ok((out, out_range))
}

impl Environment for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        2
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
        state[0].abs() >= Self::THETA_UNSAFE || state[1].abs() >= Self::SPEED_UNSAFE
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { dim: 1 }
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let speed = self.speed_update(state[0], state[1], action[0]);
        vec![state[0] + speed * DT, speed]
    }

    fn reward(&self, state: &[f64], _action: &[f64]) -> f64 {
        -(state[0] * state[0] + state[1] * state[1])
    }

    fn encode_dynamics(
        &self,
        p: &mut MilpProblem,
        x: &[VarId],
        u: &[VarId],
        x_range: &[Interval],
        u_range: &[Interval],
    ) -> Vec<VarId> {
        let cu = encode_clip(p, u[0], 1.0, u_range[0], "pend_u");
        let (ang, ang_range) =
            encode_angular(p, x[0], PI, x_range[0], "pend").expect("theta window fits");
        // Pre-clip angular velocity.
        let pre_range = Interval {
            lo: x_range[1].lo + ANGULAR_GAIN * ang_range.hi - TORQUE_GAIN,
            hi: x_range[1].hi + ANGULAR_GAIN * ang_range.lo + TORQUE_GAIN,
        };
        let pre = p.add_continuous("pend_pre", pre_range.lo - 1e-9, pre_range.hi + 1e-9);
        let mut e = LinExpr::new();
        e.add(pre, 1.0)
            .add(x[1], -1.0)
            .add(ang, -ANGULAR_GAIN)
            .add(cu, -TORQUE_GAIN);
        p.add_constraint(e, Relation::Eq, 0.0);
        let speed = encode_clip(p, pre, SPEED_CLIP, pre_range, "pend_speed");
        let speed_range = Interval {
            lo: pre_range.lo.clamp(-SPEED_CLIP, SPEED_CLIP),
            hi: pre_range.hi.clamp(-SPEED_CLIP, SPEED_CLIP),
        };
        let theta_range = Interval {
            lo: x_range[0].lo + DT * speed_range.lo,
            hi: x_range[0].hi + DT * speed_range.hi,
        };
        let theta = p.add_continuous("pend_theta", theta_range.lo - 1e-9, theta_range.hi + 1e-9);
        let mut e = LinExpr::new();
        e.add(theta, 1.0).add(x[0], -1.0).add(speed, -DT);
        p.add_constraint(e, Relation::Eq, 0.0);
        vec![theta, speed]
    }
}
