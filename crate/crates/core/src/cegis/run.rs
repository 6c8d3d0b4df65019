//! The learner/verifier loop and the weight-set radius search.

use super::learner::{init_datasets, train_candidate};
use super::verifier::{verify_candidate, VerifyOutcome};
use super::{
    CeDataset, CegisConfig, CegisError, CegisMode, CegisOutcome, CegisStats, Counterexample,
    IterationRecord, SpecDataset, UnsafeReason,
};
use crate::bnn::BnnPolicy;
use crate::env::Environment;
use crate::nn::MlpNetwork;
use rand::Rng;
use std::time::Instant;

/// Carry-over state between radius levels: the last certified candidate and
/// the accumulated membership dataset. Transition counterexamples are not
/// carried (they were generated against a smaller weight box).
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub invariant: MlpNetwork,
    pub spec: SpecDataset,
}

/// One full certification attempt at a fixed weight-set radius.
pub fn run_cegis<R: Rng>(
    env: &dyn Environment,
    policy: &BnnPolicy,
    eps_scale: f64,
    cfg: &CegisConfig,
    rng: &mut R,
) -> Result<CegisOutcome, CegisError> {
    run_cegis_warm(env, policy, eps_scale, cfg, rng, None)
}

/// [`run_cegis`] with an optional warm start from a previous success.
pub fn run_cegis_warm<R: Rng>(
    env: &dyn Environment,
    policy: &BnnPolicy,
    eps_scale: f64,
    cfg: &CegisConfig,
    rng: &mut R,
    warm: Option<WarmStart>,
) -> Result<CegisOutcome, CegisError> {
    if policy.input_dim() != env.state_dim() || policy.output_dim() != env.policy_output_dim() {
        return Err(CegisError::Config(format!(
            "policy {}-in/{}-out does not match {}",
            policy.input_dim(),
            policy.output_dim(),
            env.name()
        )));
    }
    let start = Instant::now();
    let deadline = start + cfg.timeout;
    let mut stats = CegisStats::default();

    let (g0, mut spec) = match warm {
        Some(w) => (w.invariant, w.spec),
        None => {
            let spec = init_datasets(env, policy, eps_scale, cfg, rng)?;
            let g = MlpNetwork::random(&[env.state_dim(), cfg.invariant_hidden, 1], rng.gen())?;
            (g, spec)
        }
    };
    let mut ce = CeDataset::default();

    // Pre-training on the initial datasets.
    let (mut g, mut loss) = train_candidate(&g0, &spec, &ce, cfg, &cfg.pretrain)?;

    loop {
        stats.iterations += 1;
        let iter = stats.iterations;
        let solve_start = Instant::now();
        let outcome = verify_candidate(
            &g,
            env,
            policy,
            eps_scale,
            cfg.delta_strict,
            deadline,
            cfg.worst_counterexample,
        )?;
        let solver_ms = solve_start.elapsed().as_millis();
        stats.solver_ms += solver_ms;

        log::debug!(
            "cegis[{} eps={eps_scale}] iter {iter}: {} in {solver_ms} ms (|spec|={}, |ce|={}, loss={loss:.4})",
            env.name(),
            match &outcome {
                VerifyOutcome::Pass => "pass".to_string(),
                VerifyOutcome::Timeout => "solver timeout".to_string(),
                VerifyOutcome::Cex(c) => format!("{} counterexample", c.kind()),
            },
            spec.len(),
            ce.len(),
        );
        match outcome {
            VerifyOutcome::Pass => {
                stats.records.push(IterationRecord {
                    iter,
                    check_fired: None,
                    witness: None,
                    d_spec: spec.len(),
                    d_ce: ce.len(),
                    loss,
                    solver_ms,
                });
                return Ok(CegisOutcome::Safe {
                    invariant: g,
                    spec,
                    ce,
                    stats,
                });
            }
            VerifyOutcome::Timeout => {
                stats.records.push(IterationRecord {
                    iter,
                    check_fired: Some("timeout".into()),
                    witness: None,
                    d_spec: spec.len(),
                    d_ce: ce.len(),
                    loss,
                    solver_ms,
                });
                return Ok(CegisOutcome::Unsafe {
                    reason: UnsafeReason::Timeout,
                    stats,
                });
            }
            VerifyOutcome::Cex(cex) => {
                stats.counterexamples += 1;
                let witness = match &cex {
                    Counterexample::Transition { x, .. }
                    | Counterexample::Init { x }
                    | Counterexample::Unsafe { x } => Some(x.clone()),
                };
                stats.records.push(IterationRecord {
                    iter,
                    check_fired: Some(cex.kind().to_string()),
                    witness,
                    d_spec: spec.len(),
                    d_ce: ce.len(),
                    loss,
                    solver_ms,
                });
                if cfg.mode == CegisMode::NoRetrain {
                    return Ok(CegisOutcome::Unsafe {
                        reason: UnsafeReason::RetrainingDisabled,
                        stats,
                    });
                }
                match cex {
                    Counterexample::Transition { x, xp } => ce.pairs.push((x, xp)),
                    Counterexample::Init { x } => spec.push(x, 1),
                    Counterexample::Unsafe { x } => spec.push(x, 0),
                }
                if Instant::now() > deadline {
                    return Ok(CegisOutcome::Unsafe {
                        reason: UnsafeReason::Timeout,
                        stats,
                    });
                }
                let (g_new, l_new) = train_candidate(&g, &spec, &ce, cfg, &cfg.retrain)?;
                g = g_new;
                loss = l_new;
            }
        }
    }
}

/// Result of an ascending radius search.
#[derive(Debug)]
pub struct EpsSearchResult {
    /// `(eps_scale, outcome)` per attempted level, in schedule order.
    pub runs: Vec<(f64, CegisOutcome)>,
    pub largest_safe: Option<f64>,
}

/// Certifies increasing weight-set radii until one fails, warm-starting each
/// level with the previous certificate and membership dataset.
pub fn eps_search<R: Rng>(
    env: &dyn Environment,
    policy: &BnnPolicy,
    schedule: &[f64],
    cfg: &CegisConfig,
    rng: &mut R,
) -> Result<EpsSearchResult, CegisError> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) || schedule.iter().any(|e| !e.is_finite()) {
        return Err(CegisError::Config(
            "eps schedule must be finite and strictly ascending".into(),
        ));
    }
    let mut runs = Vec::new();
    let mut largest_safe = None;
    let mut warm: Option<WarmStart> = None;

    for &eps in schedule {
        let outcome = run_cegis_warm(env, policy, eps, cfg, rng, warm.take())?;
        let safe = outcome.is_safe();
        if let CegisOutcome::Safe {
            invariant, spec, ..
        } = &outcome
        {
            largest_safe = Some(eps);
            warm = Some(WarmStart {
                invariant: invariant.clone(),
                spec: spec.clone(),
            });
        }
        runs.push((eps, outcome));
        if !safe {
            break;
        }
    }
    Ok(EpsSearchResult { runs, largest_safe })
}

/// Default radius schedule, in multiples of each weight's posterior stddev.
pub const DEFAULT_EPS_SCHEDULE: [f64; 5] = [0.2, 0.5, 1.0, 1.5, 2.0];
