//! Dataset initialization and candidate training.

use super::loss::{ce_loss, ClsLoss};
use super::{CeDataset, CegisConfig, CegisError, CegisMode, SpecDataset};
use crate::bnn::BnnPolicy;
use crate::env::{rollout, Environment};
use crate::nn::{AdamState, MlpNetwork, NnError};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds the initial labeled dataset: initial-set samples labeled 1,
/// unsafe-set samples labeled 0, plus (in bootstrap mode) random states
/// labeled by whether a Monte-Carlo rollout reaches the unsafe set.
pub fn init_datasets<R: Rng>(
    env: &dyn Environment,
    policy: &BnnPolicy,
    eps_scale: f64,
    cfg: &CegisConfig,
    rng: &mut R,
) -> Result<SpecDataset, CegisError> {
    if cfg.init_samples_x0 == 0 || cfg.init_samples_xu == 0 {
        return Err(CegisError::Config(
            "init sample counts must be >= 1".into(),
        ));
    }
    let mut spec = SpecDataset::default();
    for _ in 0..cfg.init_samples_x0 {
        let x = env.initial_set().sample(rng);
        debug_assert!(env.initial_set().contains(&x));
        spec.push(x, 1);
    }
    for _ in 0..cfg.init_samples_xu {
        let x = env.sample_unsafe(rng);
        debug_assert!(env.is_unsafe(&x));
        spec.push(x, 0);
    }
    if cfg.mode == CegisMode::Bootstrap {
        let bx = policy
            .weight_box(eps_scale)
            .map_err(|e| CegisError::Config(e.to_string()))?;
        for _ in 0..cfg.bootstrap_trajectories {
            let start = env.state_box().sample(rng);
            let label = if env.is_unsafe(&start) {
                0
            } else {
                let traj = rollout(
                    env,
                    policy,
                    &bx,
                    &start,
                    cfg.bootstrap_horizon,
                    rng,
                    cfg.max_draws,
                )
                .map_err(|e| CegisError::Config(e.to_string()))?;
                u8::from(traj.safe)
            };
            spec.push(start, label);
        }
    }
    Ok(spec)
}

/// Minimizes the total loss with the logistic surrogate. The indicator
/// factors of the counterexample term are evaluated on the current forward
/// pass and treated as constants for the backward pass.
pub fn train_candidate(
    g: &MlpNetwork,
    spec: &SpecDataset,
    ce: &CeDataset,
    cfg: &CegisConfig,
    train_cfg: &crate::nn::TrainConfig,
) -> Result<(MlpNetwork, f64), CegisError> {
    train_cfg.validate()?;
    if spec.is_empty() {
        return Err(CegisError::Config("spec dataset is empty".into()));
    }
    let cls = ClsLoss::Logistic;
    let mut net = g.clone();
    let mut params = net.params_flat();
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut order: Vec<usize> = (0..spec.len()).collect();

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(train_cfg.batch_size) {
            let mut grad = vec![0.0; params.len()];
            // Classification term over the mini-batch.
            for &i in chunk {
                let (x, y) = &spec.points[i];
                let trace = net.forward_trace(x)?;
                let z = trace.output()[0];
                let dz = cls.grad(z, *y as f64) / chunk.len() as f64;
                if dz != 0.0 {
                    let (gp, _) = net.backprop(&trace, &[dz]);
                    for (a, b) in grad.iter_mut().zip(&gp) {
                        *a += b;
                    }
                }
            }
            // Counterexample term over the full (small) pair set; the two
            // indicators are frozen per step.
            if !ce.is_empty() && cfg.lambda > 0.0 {
                let scale = cfg.lambda / ce.len() as f64;
                for (x, xp) in &ce.pairs {
                    let trace = net.forward_trace(x)?;
                    let trace_p = net.forward_trace(xp)?;
                    let z = trace.output()[0];
                    let zp = trace_p.output()[0];
                    if z > 0.0 && zp < 0.0 {
                        let l_z = cls.eval(z, 0.0);
                        let l_zp = cls.eval(zp, 1.0);
                        let dz = scale * cls.grad(z, 0.0) * l_zp;
                        let dzp = scale * l_z * cls.grad(zp, 1.0);
                        let (gp, _) = net.backprop(&trace, &[dz]);
                        for (a, b) in grad.iter_mut().zip(&gp) {
                            *a += b;
                        }
                        let (gpp, _) = net.backprop(&trace_p, &[dzp]);
                        for (a, b) in grad.iter_mut().zip(&gpp) {
                            *a += b;
                        }
                    }
                }
            }
            adam.step(&mut params, &grad, train_cfg);
            net.set_params_flat(&params)
                .map_err(|_| NnError::NanLoss { epoch })?;
        }
        let l = current_loss(&net, spec, ce, cfg, cls);
        if !l.is_finite() {
            return Err(CegisError::Nn(NnError::NanLoss { epoch }));
        }
    }
    let final_loss = current_loss(&net, spec, ce, cfg, cls);
    Ok((net, final_loss))
}

fn current_loss(
    net: &MlpNetwork,
    spec: &SpecDataset,
    ce: &CeDataset,
    cfg: &CegisConfig,
    cls: ClsLoss,
) -> f64 {
    let mut total = 0.0;
    for (x, y) in &spec.points {
        let z = net.forward(x).expect("dims")[0];
        total += cls.eval(z, *y as f64);
    }
    total /= spec.len() as f64;
    if !ce.is_empty() {
        let mut s = 0.0;
        for (x, xp) in &ce.pairs {
            let z = net.forward(x).expect("dims")[0];
            let zp = net.forward(xp).expect("dims")[0];
            s += ce_loss(cls, z, zp);
        }
        total += cfg.lambda * s / ce.len() as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cegis::loss_total;
    use crate::env::Affine1d;
    use crate::fixtures::toy_policy_1d;
    use crate::nn::TrainConfig;

    fn cfg() -> CegisConfig {
        CegisConfig {
            init_samples_x0: 64,
            init_samples_xu: 64,
            bootstrap_trajectories: 64,
            bootstrap_horizon: 20,
            ..CegisConfig::default()
        }
    }

    #[test]
    fn init_dataset_labels_memberships() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = cfg();
        c.mode = CegisMode::SpecInit;
        let spec = init_datasets(&env, &policy, 0.5, &c, &mut rng).unwrap();
        assert_eq!(spec.len(), 128);
        for (x, y) in &spec.points {
            if *y == 1 {
                assert!(env.initial_set().contains(x));
            } else {
                assert!(env.is_unsafe(x));
            }
        }
    }

    #[test]
    fn bootstrap_labels_unsafe_starts_zero() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = cfg(); // bootstrap mode by default
        let spec = init_datasets(&env, &policy, 0.5, &c, &mut rng).unwrap();
        assert_eq!(spec.len(), 64 + 64 + 64);
        for (x, y) in &spec.points {
            if env.is_unsafe(x) {
                assert_eq!(*y, 0, "unsafe state {x:?} labeled 1");
            }
        }
        // The contracting toy never leaves |x| < 1 from inside, so every
        // safe bootstrap start must be labeled 1.
        for (x, y) in &spec.points {
            if x[0].abs() < 0.99 {
                assert_eq!(*y, 1, "safe start {x:?} labeled 0");
            }
        }
    }

    #[test]
    fn training_on_separable_memberships_converges() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = cfg();
        c.mode = CegisMode::SpecInit;
        let spec = init_datasets(&env, &policy, 0.5, &c, &mut rng).unwrap();
        let g0 = MlpNetwork::random(&[1, 12, 1], 5).unwrap();
        let tc = TrainConfig {
            learning_rate: 5e-3,
            epochs: 300,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let (g, final_loss) =
            train_candidate(&g0, &spec, &CeDataset::default(), &c, &tc).unwrap();
        assert!(final_loss < 0.1, "loss {final_loss}");
        let _ = g;
    }

    #[test]
    fn violated_pair_increases_loss_before_retraining() {
        let g = crate::fixtures::hand_invariant_1d(0.5); // g(x) = 0.5 - |x|
        let mut spec = SpecDataset::default();
        spec.push(vec![0.0], 1);
        let no_ce = loss_total(&g, &spec, &CeDataset::default(), 1.0, ClsLoss::Logistic);
        let ce = CeDataset {
            pairs: vec![(vec![0.2], vec![1.0])], // g = +0.3 -> -0.5: violated
        };
        let with_ce = loss_total(&g, &spec, &ce, 1.0, ClsLoss::Logistic);
        assert!(with_ce > no_ce, "{with_ce} vs {no_ce}");
    }

    #[test]
    fn training_is_deterministic() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = cfg();
        c.mode = CegisMode::SpecInit;
        let spec = init_datasets(&env, &policy, 0.5, &c, &mut rng).unwrap();
        let g0 = MlpNetwork::random(&[1, 8, 1], 6).unwrap();
        let tc = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        let (a, _) = train_candidate(&g0, &spec, &CeDataset::default(), &c, &tc).unwrap();
        let (b, _) = train_candidate(&g0, &spec, &CeDataset::default(), &c, &tc).unwrap();
        let pa = a.params_flat();
        let pb = b.params_flat();
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
