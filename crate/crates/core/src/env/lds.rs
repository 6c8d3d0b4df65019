//! Unstable linear dynamical system stabilized toward the origin.
//!
//! State `(x, y)`, scalar action `u`:
//!
//! ```text
//! y' = y + 0.2 * clip_{+-1}(u)
//! x' = x + 0.3 * y' + 0.05 * clip_{+-1}(u)
//! ```
//!
//! Initial states `|.|_inf <= 0.6`, unsafe states `|.|_inf >= 1.2`.

use super::{clip, ActionSpace, Environment};
use crate::encode::{encode_clip, BoxSet, DisjunctiveSet, Interval};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};

#[derive(Debug, Clone)]
pub struct Lds {
    state_box: BoxSet,
    initial: BoxSet,
    unsafe_set: DisjunctiveSet,
}

impl Lds {
    pub const UNSAFE_RADIUS: f64 = 1.2;

    pub fn new() -> Self {
        Self {
            state_box: BoxSet::centered(2, 1.3).expect("static box"),
            initial: BoxSet::centered(2, 0.6).expect("static box"),
            unsafe_set: DisjunctiveSet::outside_sup_ball(2, Self::UNSAFE_RADIUS),
        }
    }
}

impl Default for Lds {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Lds {
    fn name(&self) -> &str {
        "lds"
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
        state[0].abs() >= Self::UNSAFE_RADIUS || state[1].abs() >= Self::UNSAFE_RADIUS
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { dim: 1 }
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let cu = clip(action[0], 1.0);
        let y_next = state[1] + 0.2 * cu;
        let x_next = state[0] + 0.3 * y_next + 0.05 * cu;
        vec![x_next, y_next]
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
        let cu = encode_clip(p, u[0], 1.0, u_range[0], "lds_u");
        let yp_range = Interval {
            lo: x_range[1].lo - 0.2,
            hi: x_range[1].hi + 0.2,
        };
        let yp = p.add_continuous("lds_yp", yp_range.lo, yp_range.hi);
        // y' - y - 0.2 cu = 0
        let mut e = LinExpr::new();
        e.add(yp, 1.0).add(x[1], -1.0).add(cu, -0.2);
        p.add_constraint(e, Relation::Eq, 0.0);
        let xp_range = Interval {
            lo: x_range[0].lo + 0.3 * yp_range.lo - 0.05,
            hi: x_range[0].hi + 0.3 * yp_range.hi + 0.05,
        };
        let xp = p.add_continuous("lds_xp", xp_range.lo, xp_range.hi);
        // x' - x - 0.3 y' - 0.05 cu = 0
        let mut e = LinExpr::new();
        e.add(xp, 1.0)
            .add(x[0], -1.0)
            .add(yp, -0.3)
            .add(cu, -0.05);
        p.add_constraint(e, Relation::Eq, 0.0);
        vec![xp, yp]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::testutil::assert_dynamics_agree;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_is_fixed_point() {
        let env = Lds::new();
        assert_eq!(env.step(&[0.0, 0.0], &[0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn step_reference_value() {
        let env = Lds::new();
        let next = env.step(&[0.5, 0.5], &[1.0]);
        assert!((next[1] - 0.7).abs() < 1e-15);
        assert!((next[0] - 0.76).abs() < 1e-15);
    }

    #[test]
    fn configured_sets_match_benchmark() {
        let env = Lds::new();
        assert!(env.initial_set().contains(&[0.6, -0.6]));
        assert!(!env.initial_set().contains(&[0.7, 0.0]));
        assert!(env.is_unsafe(&[1.2, 0.0]));
        assert!(!env.is_unsafe(&[1.1, -1.1]));
        assert!(env.state_box().contains_box(env.initial_set()));
    }

    #[test]
    fn dual_representation_agrees() {
        let env = Lds::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..25 {
            let x = [rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3)];
            let u = [rng.gen_range(-2.0..2.0)];
            assert_dynamics_agree(&env, &x, &u, 1e-6);
        }
    }
}
