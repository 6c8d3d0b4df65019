//! Collision avoidance with a discrete lateral-movement action.
//!
//! State `(p_x, a_x, a_y)`: the agent's vertical position and the intruder's
//! vertical and horizontal position. The intruder closes in by one unit of
//! `a_y` per step; the agent picks `u in {-1, 0, 1}` by the argmax of three
//! policy logits:
//!
//! ```text
//! p_x' = p_x + u,   a_x' = a_x,   a_y' = a_y - 1
//! ```
//!
//! The benchmark description states the unsafe set with `a_y = 5`, which
//! overlaps the initial set (`a_y = 5` there too) and would make some initial
//! states unsafe by definition. The default here places the collision at
//! `a_y = 0`, when the intruder reaches the agent; the literal variant stays
//! available behind [`Collision::with_literal_unsafe_set`].

use super::{ActionSpace, Environment};
use crate::encode::{BoxSet, DisjunctiveSet, Interval, LinearIneq, PolyhedronSet};
use crate::milp::{LinExpr, MilpProblem, Relation, VarId};

const ACTION_VALUES: [f64; 3] = [-1.0, 0.0, 1.0];

#[derive(Debug, Clone)]
pub struct Collision {
    state_box: BoxSet,
    initial: BoxSet,
    unsafe_set: DisjunctiveSet,
    collision_ay: f64,
}

impl Collision {
    /// Default variant: collision happens when the intruder arrives
    /// (`a_y = 0`).
    pub fn new(literal_unsafe_set: bool) -> Self {
        let collision_ay = if literal_unsafe_set { 5.0 } else { 0.0 };
        let unsafe_set = DisjunctiveSet::new(vec![PolyhedronSet::new(vec![
            LinearIneq {
                coeffs: vec![1.0, -1.0, 0.0],
                rhs: 1.0,
            }, // p - a_x <= 1
            LinearIneq {
                coeffs: vec![-1.0, 1.0, 0.0],
                rhs: 1.0,
            }, // a_x - p <= 1
            LinearIneq {
                coeffs: vec![0.0, 0.0, 1.0],
                rhs: collision_ay,
            }, // a_y <= c
            LinearIneq {
                coeffs: vec![0.0, 0.0, -1.0],
                rhs: -collision_ay,
            }, // a_y >= c
        ])]);
        Self {
            state_box: BoxSet::new(vec![-3.0, -3.0, 0.0], vec![3.0, 3.0, 5.0])
                .expect("static box"),
            initial: BoxSet::new(vec![-2.0, -2.0, 5.0], vec![2.0, 2.0, 5.0])
                .expect("static box"),
            unsafe_set,
            collision_ay,
        }
    }

    /// The appendix-literal unsafe set (`a_y = 5`), kept for comparison.
    pub fn with_literal_unsafe_set() -> Self {
        Self::new(true)
    }
}

impl Default for Collision {
    fn default() -> Self {
        Self::new(false)
    }
}

impl Environment for Collision {
    fn name(&self) -> &str {
        "collision"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn policy_output_dim(&self) -> usize {
        3
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
        (state[0] - state[1]).abs() <= 1.0 && state[2] == self.collision_ay
    }

    fn sample_unsafe(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        // The unsafe set lives on the plane a_y = collision_ay, which has
        // measure zero in the box; sample the plane directly.
        use rand::Rng;
        loop {
            let p: f64 = rng.gen_range(-3.0..=3.0);
            let a: f64 = rng.gen_range(-3.0..=3.0);
            if (p - a).abs() <= 1.0 {
                return vec![p, a, self.collision_ay];
            }
        }
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete {
            values: ACTION_VALUES.to_vec(),
        }
    }

    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let u = action[0];
        assert!(
            ACTION_VALUES.iter().any(|v| (v - u).abs() < 1e-9),
            "collision action must be in {{-1, 0, 1}}, got {u}"
        );
        vec![state[0] + u, state[1], state[2] - 1.0]
    }

    fn reward(&self, _state: &[f64], _action: &[f64]) -> f64 {
        1.0 // per survived step
    }

    fn encode_dynamics(
        &self,
        p: &mut MilpProblem,
        x: &[VarId],
        u: &[VarId],
        x_range: &[Interval],
        u_range: &[Interval],
    ) -> Vec<VarId> {
        // Argmax selection: one indicator per candidate action, exactly one
        // set; the chosen logit must dominate the others up to big-M slack.
        // Ties are permissive (any maximizer may be selected), which is the
        // conservative reading for verification.
        let sel: Vec<VarId> = (0..3)
            .map(|k| p.add_binary(format!("col_sel{k}")))
            .collect();
        let mut sum = LinExpr::new();
        for &s in &sel {
            sum.add(s, 1.0);
        }
        p.add_constraint(sum, Relation::Eq, 1.0);
        for k in 0..3 {
            for j in 0..3 {
                if j == k {
                    continue;
                }
                let big_m = (u_range[j].hi - u_range[k].lo).max(0.0) + 1e-6;
                // L_k >= L_j - M (1 - sel_k)
                let mut e = LinExpr::new();
                e.add(u[k], 1.0).add(u[j], -1.0).add(sel[k], -big_m);
                p.add_constraint(e, Relation::Ge, -big_m);
            }
        }
        // p' = p + (sel_2 - sel_0); action values are -1, 0, +1.
        let pp = p.add_continuous(
            "col_pp",
            x_range[0].lo - 1.0,
            x_range[0].hi + 1.0,
        );
        let mut e = LinExpr::new();
        e.add(pp, 1.0)
            .add(x[0], -1.0)
            .add(sel[2], -1.0)
            .add(sel[0], 1.0);
        p.add_constraint(e, Relation::Eq, 0.0);
        // a_x' = a_x
        let axp = p.add_continuous("col_axp", x_range[1].lo, x_range[1].hi);
        let mut e = LinExpr::new();
        e.add(axp, 1.0).add(x[1], -1.0);
        p.add_constraint(e, Relation::Eq, 0.0);
        // a_y' = a_y - 1
        let ayp = p.add_continuous("col_ayp", x_range[2].lo - 1.0, x_range[2].hi - 1.0);
        let mut e = LinExpr::new();
        e.add(ayp, 1.0).add(x[2], -1.0);
        p.add_constraint(e, Relation::Eq, -1.0);
        vec![pp, axp, ayp]
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
    fn step_reference_values() {
        let env = Collision::new(false);
        assert_eq!(env.step(&[0.0, 2.0, 5.0], &[1.0]), vec![1.0, 2.0, 4.0]);
        assert_eq!(env.step(&[0.0, 0.0, 3.0], &[0.0]), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn integer_states_stay_integer() {
        let env = Collision::new(false);
        let mut state = vec![-2.0, 1.0, 5.0];
        for u in [-1.0, 1.0, 0.0, 1.0, -1.0] {
            state = env.step(&state, &[u]);
            assert!(state.iter().all(|v| v.fract() == 0.0), "{state:?}");
        }
    }

    #[test]
    fn argmax_action_mapping() {
        let env = Collision::new(false);
        assert_eq!(env.action_of_output(&[0.3, -0.1, 0.9]), vec![1.0]);
        assert_eq!(env.action_of_output(&[1.3, -0.1, 0.9]), vec![-1.0]);
        assert_eq!(env.action_of_output(&[0.0, 0.4, 0.2]), vec![0.0]);
    }

    #[test]
    fn default_unsafe_set_is_consistent_with_initial_set() {
        let env = Collision::new(false);
        // No initial state is unsafe under the default variant.
        assert!(!env.is_unsafe(&[0.0, 0.0, 5.0]));
        assert!(env.is_unsafe(&[0.5, 0.0, 0.0]));
        // The literal variant makes some initial states unsafe by definition.
        let literal = Collision::with_literal_unsafe_set();
        assert!(literal.is_unsafe(&[0.0, 0.0, 5.0]));
    }

    #[test]
    fn dual_representation_agrees() {
        let env = Collision::new(false);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let x = [
                rng.gen_range(-3..=3) as f64,
                rng.gen_range(-3..=3) as f64,
                rng.gen_range(0..=5) as f64,
            ];
            // Distinct logits so the argmax is unambiguous.
            let mut u = [0.0; 3];
            loop {
                for v in &mut u {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let mut sorted = u.to_vec();
                sorted.sort_by(f64::total_cmp);
                if sorted[2] - sorted[1] > 1e-3 {
                    break;
                }
            }
            assert_dynamics_agree(&env, &x, &u, 1e-6);
        }
    }
}
