//! Benchmark environments in dual representation: an executable step
//! function for simulation and a piecewise-linear MILP encoding of the same
//! dynamics for verification.
//!
//! The two representations must agree: for any fixed `(x, u)` the dynamics
//! constraints admit exactly `x' = step(x, u)` (within feasibility
//! tolerance). Tests enforce this on all environments.

mod collision;
mod lds;
mod pendulum;
mod toy;

pub use collision::Collision;
pub use lds::Lds;
pub use pendulum::Pendulum;
pub use toy::Affine1d;

use crate::bnn::{BnnError, BnnPolicy, WeightBox};
use crate::encode::{BoxSet, DisjunctiveSet, Interval};
use crate::milp::{MilpProblem, VarId};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum RolloutError {
    #[error("weight sampling failed at step {step}: {source}")]
    Sampling { step: usize, source: BnnError },
    #[error("policy/environment dimension mismatch: {0}")]
    Dimension(String),
}

/// Action space of an environment, as seen by the policy's output layer.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    /// The policy output is the (pre-clip) continuous action vector.
    Continuous { dim: usize },
    /// The policy emits one logit per candidate value; the action is the
    /// value with the largest logit.
    Discrete { values: Vec<f64> },
}

/// A discrete-time control environment with box-bounded verification domain.
pub trait Environment: Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    /// Output dimension expected from a policy network.
    fn policy_output_dim(&self) -> usize;
    /// Bounded verification domain; must contain the initial set and the
    /// boundary of the unsafe set.
    fn state_box(&self) -> &BoxSet;
    fn initial_set(&self) -> &BoxSet;
    fn unsafe_set(&self) -> &DisjunctiveSet;
    /// Exact membership predicate for the unsafe set (not delta-relaxed).
    fn is_unsafe(&self, state: &[f64]) -> bool;
    /// Uniform-ish sample from the unsafe set restricted to the state box.
    /// The default rejection-samples the box; environments whose unsafe set
    /// has measure zero in the box must override.
    fn sample_unsafe(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        for _ in 0..100_000 {
            let x = self.state_box().sample(rng);
            if self.is_unsafe(&x) {
                return x;
            }
        }
        panic!(
            "{}: unsafe set not reachable by rejection sampling; override sample_unsafe",
            self.name()
        );
    }
    fn action_space(&self) -> ActionSpace;
    /// Maps a raw policy output to the applied action.
    fn action_of_output(&self, output: &[f64]) -> Vec<f64> {
        match self.action_space() {
            ActionSpace::Continuous { .. } => output.to_vec(),
            ActionSpace::Discrete { values } => {
                let mut best = 0;
                for (i, v) in output.iter().enumerate() {
                    if *v > output[best] {
                        best = i;
                    }
                }
                vec![values[best]]
            }
        }
    }
    /// One transition. `action` is the applied action (post
    /// [`action_of_output`](Self::action_of_output)).
    fn step(&self, state: &[f64], action: &[f64]) -> Vec<f64>;
    fn reward(&self, state: &[f64], action: &[f64]) -> f64;
    /// Emits MILP constraints tying `(x, u)` to the successor state, where
    /// `u` are the raw policy-output variables. Returns the successor
    /// variables, bounded by the dynamics' natural range (not clipped to the
    /// state box — callers add box membership where needed). `x_range` and
    /// `u_range` must be valid bounds on the feasible values of `x` and `u`.
    fn encode_dynamics(
        &self,
        p: &mut MilpProblem,
        x: &[VarId],
        u: &[VarId],
        x_range: &[Interval],
        u_range: &[Interval],
    ) -> Vec<VarId>;
}

/// `min(z, max(-z, x))`.
pub fn clip(x: f64, z: f64) -> f64 {
    assert!(z > 0.0, "clip threshold must be positive");
    x.clamp(-z, z)
}

/// Piecewise-linear stand-in for `sin` used by the pendulum benchmark.
/// Shifts the argument by multiples of 2*pi into `(pi/2, 5*pi/2]`, then
/// evaluates the triangle wave: `(x - 2pi) / (pi/2)` on `(3pi/2, 5pi/2]` and
/// `2 - x / (pi/2)` on `(pi/2, 3pi/2]`.
pub fn angular(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut v = x;
    while v <= PI / 2.0 {
        v += 2.0 * PI;
    }
    while v > 5.0 * PI / 2.0 {
        v -= 2.0 * PI;
    }
    if v > 3.0 * PI / 2.0 {
        (v - 2.0 * PI) / (PI / 2.0)
    } else {
        2.0 - v / (PI / 2.0)
    }
}

/// One executed transition of a rollout.
#[derive(Debug, Clone)]
pub struct TrajStep {
    pub state: Vec<f64>,
    /// Raw policy-network output at `state`.
    pub output: Vec<f64>,
    /// Applied action (continuous: equal to `output`; discrete: the argmax
    /// value).
    pub action: Vec<f64>,
}

/// A finite rollout. `safe` iff no visited state (including the start and
/// the final state) lies in the unsafe set.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
    pub final_state: Vec<f64>,
    pub safe: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Simulates the closed loop for `horizon` steps, drawing the network
/// parameters from the posterior restricted to `bx` at every step (the
/// distribution of whole-vector rejection sampling, evaluated one coordinate
/// at a time). Stops early when an unsafe state is reached.
pub fn rollout<R: Rng + ?Sized>(
    env: &dyn Environment,
    policy: &BnnPolicy,
    bx: &WeightBox,
    start: &[f64],
    horizon: usize,
    rng: &mut R,
    max_draws: usize,
) -> Result<Trajectory, RolloutError> {
    assert!(horizon >= 1, "horizon must be >= 1");
    if policy.input_dim() != env.state_dim() || policy.output_dim() != env.policy_output_dim() {
        return Err(RolloutError::Dimension(format!(
            "policy {}-in {}-out vs env {}-state {}-output",
            policy.input_dim(),
            policy.output_dim(),
            env.state_dim(),
            env.policy_output_dim()
        )));
    }
    let mut state = start.to_vec();
    let mut steps = Vec::with_capacity(horizon);
    let mut safe = !env.is_unsafe(&state);
    if safe {
        for t in 0..horizon {
            let params = policy
                .sample_in_box(bx, rng, max_draws)
                .map_err(|source| RolloutError::Sampling { step: t, source })?;
            let net = policy
                .instantiate(&params)
                .map_err(|source| RolloutError::Sampling { step: t, source })?;
            let output = net
                .forward(&state)
                .map_err(|e| RolloutError::Dimension(e.to_string()))?;
            let action = env.action_of_output(&output);
            let next = env.step(&state, &action);
            steps.push(TrajStep {
                state: state.clone(),
                output,
                action,
            });
            state = next;
            if env.is_unsafe(&state) {
                safe = false;
                break;
            }
        }
    }
    Ok(Trajectory {
        steps,
        final_state: state,
        safe,
    })
}

/// Result of a Monte-Carlo safety confirmation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct McReport {
    pub rollouts: usize,
    pub horizon: usize,
    pub unsafe_trajectories: usize,
}

/// Runs `rollouts` box-restricted rollouts of the given horizon from uniform
/// initial states and counts unsafe trajectories. Trajectories are
/// distributed over threads but seeded per index, so the count is
/// deterministic in `seed`.
pub fn monte_carlo_safety(
    env: &dyn Environment,
    policy: &BnnPolicy,
    bx: &WeightBox,
    rollouts: usize,
    horizon: usize,
    seed: u64,
    max_draws: usize,
) -> Result<McReport, RolloutError> {
    use rand::SeedableRng;
    use rayon::prelude::*;
    let unsafe_trajectories = (0..rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let start = env.initial_set().sample(&mut rng);
            rollout(env, policy, bx, &start, horizon, &mut rng, max_draws)
                .map(|t| usize::from(!t.safe))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    Ok(McReport {
        rollouts,
        horizon,
        unsafe_trajectories,
    })
}

/// Environment lookup used by the CLI and test fixtures.
pub fn env_by_name(name: &str, collision_literal_unsafe: bool) -> Option<Box<dyn Environment>> {
    match name {
        "lds" => Some(Box::new(Lds::new())),
        "pendulum" => Some(Box::new(Pendulum::new())),
        "collision" => Some(Box::new(Collision::new(collision_literal_unsafe))),
        _ => None,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::milp::{LinExpr, MilpVerdict, Relation, Sense};
    use std::time::Duration;

    /// Dual-representation check: with `(x, u)` pinned, minimize and
    /// maximize every successor coordinate; both must equal `step(x, u)`.
    pub fn assert_dynamics_agree(env: &dyn Environment, x: &[f64], u_raw: &[f64], tol: f64) {
        let action = env.action_of_output(u_raw);
        let want = env.step(x, &action);
        for coord in 0..env.state_dim() {
            for sense in [Sense::Minimize, Sense::Maximize] {
                let mut p = MilpProblem::new();
                let xv: Vec<VarId> = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| p.add_continuous(format!("x{i}"), *v, *v))
                    .collect();
                let uv: Vec<VarId> = u_raw
                    .iter()
                    .enumerate()
                    .map(|(i, v)| p.add_continuous(format!("u{i}"), *v, *v))
                    .collect();
                let x_range: Vec<Interval> = x.iter().map(|v| Interval::point(*v)).collect();
                let u_range: Vec<Interval> = u_raw.iter().map(|v| Interval::point(*v)).collect();
                let xp = env.encode_dynamics(&mut p, &xv, &uv, &x_range, &u_range);
                p.set_objective(sense, LinExpr::term(xp[coord], 1.0));
                match p.solve(Duration::from_secs(20)).unwrap() {
                    MilpVerdict::Optimal(s) => {
                        assert!(
                            (s.objective - want[coord]).abs() <= tol,
                            "{}: coord {coord} {:?} got {} want {} at x={x:?} u={u_raw:?}",
                            env.name(),
                            sense,
                            s.objective,
                            want[coord]
                        );
                    }
                    other => panic!("{}: expected optimal, got {other:?}", env.name()),
                }
            }
        }
    }
}
