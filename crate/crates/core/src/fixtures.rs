//! Deterministic policy and network fixtures.
//!
//! The benchmark policies are built the same way every time (structured
//! initialization plus a short seeded imitation fit), so tests, the shipped
//! policy files and the CLI all agree bit-for-bit. Bayesian layers carry a
//! posterior stddev of 0.1 from the second layer on, mirroring the benchmark
//! setup the environments come from.

use crate::bnn::{BnnLayer, BnnPolicy};
use crate::env::Environment;
use crate::nn::{train, DenseMatrix, Layer, MlpNetwork, SquaredError, TrainConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Posterior stddev used by all shipped Bayesian layers.
pub const POSTERIOR_STD: f64 = 0.1;

/// Single-layer 1-in/1-out Gaussian policy with the given weight/bias means
/// and a shared stddev on both parameters.
pub fn affine_policy_1d(w_mean: f64, b_mean: f64, sigma: f64) -> BnnPolicy {
    BnnPolicy::new(vec![BnnLayer {
        weight_mean: DenseMatrix::new(1, 1, vec![w_mean]).unwrap(),
        weight_std: DenseMatrix::new(1, 1, vec![sigma]).unwrap(),
        bias_mean: vec![b_mean],
        bias_std: vec![sigma],
        bayesian: sigma != 0.0,
    }])
    .unwrap()
}

/// Policy for the 1-D toy systems (their dynamics ignore the action).
pub fn toy_policy_1d() -> BnnPolicy {
    affine_policy_1d(0.0, 0.0, POSTERIOR_STD)
}

/// `g(x) = c - |x|` as a 1-2-1 ReLU network: a hand-checkable positive
/// invariant for the contracting toy system when `0 < c < 1`.
pub fn hand_invariant_1d(c: f64) -> MlpNetwork {
    MlpNetwork::new(vec![
        Layer::new(
            DenseMatrix::new(2, 1, vec![1.0, -1.0]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap(),
        Layer::new(DenseMatrix::new(1, 2, vec![-1.0, -1.0]).unwrap(), vec![c]).unwrap(),
    ])
    .unwrap()
}

/// Builds a 2-16-1 network that imitates the linear feedback
/// `u = -k1 * s0 - k2 * s1`. Four hidden units carry exact positive/negative
/// splits of the two state variables at a small activation scale; the rest
/// start as low-amplitude noise and get smoothed out by a short seeded fit.
fn feedback_policy_2d(
    k1: f64,
    k2: f64,
    seed: u64,
    grid_extent: f64,
    epochs: usize,
) -> BnnPolicy {
    const HIDDEN: usize = 16;
    const SCALE: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w1 = vec![0.0; HIDDEN * 2];
    w1[0] = SCALE; // h0 = relu( s*x)
    w1[2] = -SCALE; // h1 = relu(-s*x)
    w1[5] = SCALE; // h2 = relu( s*y)
    w1[7] = -SCALE; // h3 = relu(-s*y)
    for v in w1.iter_mut().skip(8) {
        *v = rng.gen_range(-0.02..0.02);
    }
    let b1: Vec<f64> = (0..HIDDEN)
        .map(|i| if i < 4 { 0.0 } else { rng.gen_range(-0.02..0.02) })
        .collect();
    let mut w2 = vec![0.0; HIDDEN];
    w2[0] = -k1 / SCALE;
    w2[1] = k1 / SCALE;
    w2[2] = -k2 / SCALE;
    w2[3] = k2 / SCALE;
    for v in w2.iter_mut().skip(4) {
        *v = rng.gen_range(-0.05..0.05);
    }
    let net = MlpNetwork::new(vec![
        Layer::new(DenseMatrix::new(HIDDEN, 2, w1).unwrap(), b1).unwrap(),
        Layer::new(DenseMatrix::new(1, HIDDEN, w2).unwrap(), vec![0.0]).unwrap(),
    ])
    .unwrap();

    // Imitation fit of the (unclipped) linear feedback over a state grid.
    let mut data = Vec::new();
    let n = 21;
    for i in 0..n {
        for j in 0..n {
            let x = -grid_extent + 2.0 * grid_extent * (i as f64) / ((n - 1) as f64);
            let y = -grid_extent + 2.0 * grid_extent * (j as f64) / ((n - 1) as f64);
            data.push((vec![x, y], vec![-k1 * x - k2 * y]));
        }
    }
    let cfg = TrainConfig {
        learning_rate: 2e-3,
        epochs,
        batch_size: 64,
        seed,
        ..TrainConfig::default()
    };
    let (net, _) = train(&net, &cfg, &SquaredError, &data).expect("imitation fit");

    bayesian_from_second_layer(&net)
}

/// Wraps a deterministic network as a BNN with Gaussian weights from the
/// second layer on (first layer deterministic).
pub fn bayesian_from_second_layer(net: &MlpNetwork) -> BnnPolicy {
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let sigma = if k == 0 { 0.0 } else { POSTERIOR_STD };
            BnnLayer {
                weight_mean: l.weight.clone(),
                weight_std: DenseMatrix::from_fn(l.weight.rows(), l.weight.cols(), |_, _| sigma),
                bias_mean: l.bias.clone(),
                bias_std: vec![sigma; l.bias.len()],
                bayesian: k > 0,
            }
        })
        .collect();
    BnnPolicy::new(layers).expect("net shapes already validated")
}

/// Stabilizing policy for the unstable linear system: strong feedback gains,
/// trained deterministically. Shipped as `assets/policies/lds_stabilizing.json`.
pub fn lds_stabilizing_policy() -> BnnPolicy {
    feedback_policy_2d(1.2, 2.2, 11, 1.3, 200)
}

/// Deliberately weak (but still safe) variant used as the starting point for
/// safe-exploration training runs.
pub fn lds_detuned_policy() -> BnnPolicy {
    feedback_policy_2d(0.5, 0.9, 12, 1.3, 200)
}

/// Best-effort pendulum policy (torque saturates well below the gravity term
/// of the piecewise-linear dynamics, so this cannot hold the full initial
/// set; shipped for simulation demos).
pub fn pendulum_policy() -> BnnPolicy {
    feedback_policy_2d(6.0, 1.5, 13, 1.0, 200)
}

/// Collision-avoidance policy: logits prefer moving away from the intruder,
/// with a downward bias that breaks the tie at equal heights.
pub fn collision_policy() -> BnnPolicy {
    const HIDDEN: usize = 16;
    const SCALE: f64 = 0.1;
    const GAIN: f64 = 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    // Inputs (p_x, a_x, a_y); structured units split d = p_x - a_x.
    let mut w1 = vec![0.0; HIDDEN * 3];
    w1[0] = SCALE;
    w1[1] = -SCALE; // h0 = relu( s*d)
    w1[3] = -SCALE;
    w1[4] = SCALE; // h1 = relu(-s*d)
    for v in w1.iter_mut().skip(6) {
        *v = rng.gen_range(-0.01..0.01);
    }
    let b1: Vec<f64> = (0..HIDDEN)
        .map(|i| if i < 2 { 0.0 } else { rng.gen_range(-0.01..0.01) })
        .collect();
    // Logits for actions (-1, 0, +1): L(-1) = -G d + bias, L(0) = 0,
    // L(+1) = G d.
    let g = GAIN / SCALE;
    let mut w2 = vec![0.0; 3 * HIDDEN];
    w2[0] = -g;
    w2[1] = g; // row 0: L(-1)
    w2[2 * HIDDEN] = g;
    w2[2 * HIDDEN + 1] = -g; // row 2: L(+1)
    for (i, v) in w2.iter_mut().enumerate() {
        let col = i % HIDDEN;
        if col >= 2 && i / HIDDEN != 1 {
            *v = rng.gen_range(-0.02..0.02);
        }
    }
    let b2 = vec![1.0, 0.0, 0.0];
    let net = MlpNetwork::new(vec![
        Layer::new(DenseMatrix::new(HIDDEN, 3, w1).unwrap(), b1).unwrap(),
        Layer::new(DenseMatrix::new(3, HIDDEN, w2).unwrap(), b2).unwrap(),
    ])
    .unwrap();
    bayesian_from_second_layer(&net)
}

/// Worst-case closed-loop excursion of a 2-D environment under the mean
/// policy plus a bounded action disturbance, estimated by corner-seeking
/// simulation from the initial set's corners.
pub fn max_disturbed_excursion(
    env: &dyn Environment,
    policy: &BnnPolicy,
    disturbance: f64,
    horizon: usize,
) -> f64 {
    let net = policy.mean_network();
    let x0 = env.initial_set();
    let mut worst: f64 = 0.0;
    let corners: Vec<Vec<f64>> = {
        let (lo, hi) = (x0.lower(), x0.upper());
        let mut pts = Vec::new();
        for mask in 0..(1usize << x0.dim()) {
            let p: Vec<f64> = (0..x0.dim())
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect();
            pts.push(p);
        }
        pts
    };
    for corner in corners {
        for sign in [-1.0, 1.0] {
            let mut state = corner.clone();
            for _ in 0..horizon {
                let mut u = net.forward(&state).expect("dims");
                u[0] += sign * disturbance;
                let action = env.action_of_output(&u);
                state = env.step(&state, &action);
                for v in &state {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{clip, rollout, Lds, Pendulum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_invariant_shape() {
        let g = hand_invariant_1d(0.95);
        for (x, want) in [(0.0, 0.95), (0.5, 0.45), (-0.5, 0.45), (1.0, -0.05)] {
            let got = g.forward(&[x]).unwrap()[0];
            assert!((got - want).abs() < 1e-12, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn fixtures_are_deterministic() {
        let a = lds_stabilizing_policy();
        let b = lds_stabilizing_policy();
        assert_eq!(a.mean_params(), b.mean_params());
    }

    #[test]
    fn stabilizing_policy_tracks_feedback_law() {
        let policy = lds_stabilizing_policy();
        let net = policy.mean_network();
        for (x, y) in [(0.5, -0.3), (1.0, 1.0), (-0.8, 0.2), (0.0, 0.0)] {
            let u = net.forward(&[x, y]).unwrap()[0];
            let want = -1.2 * x - 2.2 * y;
            assert!((u - want).abs() < 0.1, "u({x},{y}) = {u}, want {want}");
        }
    }

    #[test]
    fn stabilizing_policy_keeps_lds_safe_under_disturbance() {
        let env = Lds::new();
        let policy = lds_stabilizing_policy();
        // A 2 sigma weight box perturbs actions by well under this bound.
        let worst = max_disturbed_excursion(&env, &policy, 0.5, 200);
        assert!(worst < Lds::UNSAFE_RADIUS, "excursion {worst}");
    }

    #[test]
    fn detuned_policy_is_safe_but_weaker() {
        let env = Lds::new();
        let strong = lds_stabilizing_policy();
        let weak = lds_detuned_policy();
        let worst = max_disturbed_excursion(&env, &weak, 0.2, 200);
        assert!(worst < Lds::UNSAFE_RADIUS, "excursion {worst}");
        // Weaker gains give slower convergence, hence lower reward.
        let score = |p: &BnnPolicy| {
            let net = p.mean_network();
            let mut state = vec![0.6, 0.6];
            let mut total = 0.0;
            for _ in 0..60 {
                let u = net.forward(&state).unwrap();
                state = env.step(&state, &u);
                total += env.reward(&state, &u);
            }
            total
        };
        assert!(score(&weak) < score(&strong), "detuned should score lower");
    }

    #[test]
    fn stabilized_rollouts_from_initial_corners_are_safe() {
        let env = Lds::new();
        let policy = lds_stabilizing_policy();
        let bx = policy.weight_box(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for start in [[0.6, 0.6], [-0.6, 0.6], [0.5, -0.5], [0.0, 0.0]] {
            let traj = rollout(&env, &policy, &bx, &start, 100, &mut rng, 10_000).unwrap();
            assert!(traj.safe, "unsafe rollout from {start:?}");
        }
    }

    #[test]
    fn collision_policy_moves_away_from_intruder() {
        let policy = collision_policy();
        let net = policy.mean_network();
        let env = crate::env::Collision::new(false);
        // Intruder above: logits should favor moving down (-1).
        let l = net.forward(&[0.0, 1.0, 5.0]).unwrap();
        assert_eq!(env.action_of_output(&l), vec![-1.0]);
        // Intruder below: move up.
        let l = net.forward(&[1.0, -1.0, 5.0]).unwrap();
        assert_eq!(env.action_of_output(&l), vec![1.0]);
        // Equal heights: the bias picks -1 decisively.
        let l = net.forward(&[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(env.action_of_output(&l), vec![-1.0]);
    }

    #[test]
    fn collision_rollouts_are_safe() {
        let env = crate::env::Collision::new(false);
        let policy = collision_policy();
        let bx = policy.weight_box(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p0 in [-2.0, 0.0, 2.0] {
            for a0 in [-2.0, 0.0, 2.0] {
                let traj =
                    rollout(&env, &policy, &bx, &[p0, a0, 5.0], 20, &mut rng, 10_000).unwrap();
                assert!(traj.safe, "collision from ({p0}, {a0})");
            }
        }
    }

    #[test]
    fn pendulum_policy_forward_runs() {
        let env = Pendulum::new();
        let policy = pendulum_policy();
        let net = policy.mean_network();
        let u = net.forward(&[0.02, 0.0]).unwrap()[0];
        // Small tilt: the policy pushes against it, even though the env will
        // clip the torque.
        assert!(clip(u, 1.0) < 0.0, "u = {u}");
        let _ = env.step(&[0.02, 0.0], &[u]);
    }
}
