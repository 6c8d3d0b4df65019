//! The verifier: three MILP checks against a candidate invariant, in the
//! fixed order closedness, initial-set nonnegativity, unsafe-set negativity.
//! The first feasible witness is validated by replay and returned.

use super::{CegisError, Counterexample};
use crate::bnn::BnnPolicy;
use crate::encode::{build_check1, build_check2, build_check3, CheckProblem};
use crate::env::Environment;
use crate::milp::{MilpVerdict, MilpSolution};
use crate::nn::MlpNetwork;
use std::time::Instant;

/// Residual tolerance for witness replay validation.
const REPLAY_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub enum VerifyOutcome {
    /// All checks infeasible: the candidate is a certified invariant.
    Pass,
    Cex(Counterexample),
    /// A solver hit the remaining time budget.
    Timeout,
}

fn values_of(sol: &MilpSolution, vars: &[crate::milp::VarId]) -> Vec<f64> {
    vars.iter().map(|v| sol.value(*v)).collect()
}

fn validate_witness(
    check: &CheckProblem,
    sol: &MilpSolution,
    name: &'static str,
) -> Result<(), CegisError> {
    let (ok, residual) = check.problem.check_feasible(&sol.values);
    if !ok && residual > REPLAY_TOL {
        return Err(CegisError::WitnessReplay {
            check: name,
            residual,
        });
    }
    Ok(())
}

fn solve_check(
    check: &CheckProblem,
    deadline: Instant,
    worst: bool,
) -> Result<MilpVerdict, CegisError> {
    let budget = deadline.saturating_duration_since(Instant::now());
    if budget.is_zero() {
        return Ok(MilpVerdict::TimedOut(None));
    }
    let verdict = if worst {
        check.problem.solve(budget)?
    } else {
        check.problem.solve_first_feasible(budget)?
    };
    Ok(verdict)
}

/// Runs the three checks. `deadline` caps total solver time; a check that
/// cannot finish in the remaining budget yields [`VerifyOutcome::Timeout`].
pub fn verify_candidate(
    g: &MlpNetwork,
    env: &dyn Environment,
    policy: &BnnPolicy,
    eps_scale: f64,
    delta_strict: f64,
    deadline: Instant,
    worst_counterexample: bool,
) -> Result<VerifyOutcome, CegisError> {
    // Check 1: closedness under the box dynamics.
    let check = build_check1(g, policy, eps_scale, env, delta_strict)?;
    match solve_check(&check, deadline, worst_counterexample)? {
        MilpVerdict::Optimal(sol) => {
            validate_witness(&check, &sol, "closedness")?;
            let x = values_of(&sol, &check.x);
            let xp = values_of(&sol, &check.xp);
            // The invariant scores must straddle the boundary as claimed.
            let gx = g.forward(&x)?[0];
            let gxp = g.forward(&xp)?[0];
            if gx < -REPLAY_TOL || gxp > -delta_strict + REPLAY_TOL {
                return Err(CegisError::WitnessReplay {
                    check: "closedness-scores",
                    residual: gx.min(-gxp),
                });
            }
            return Ok(VerifyOutcome::Cex(Counterexample::Transition { x, xp }));
        }
        MilpVerdict::Infeasible => {}
        MilpVerdict::TimedOut(_) | MilpVerdict::Unbounded => return Ok(VerifyOutcome::Timeout),
    }

    // Check 2: nonnegativity on the initial set.
    let check = build_check2(g, env.initial_set(), delta_strict)?;
    match solve_check(&check, deadline, worst_counterexample)? {
        MilpVerdict::Optimal(sol) => {
            validate_witness(&check, &sol, "initial-set")?;
            let x = values_of(&sol, &check.x);
            let gx = g.forward(&x)?[0];
            if gx > -delta_strict + REPLAY_TOL {
                return Err(CegisError::WitnessReplay {
                    check: "initial-set-score",
                    residual: gx,
                });
            }
            return Ok(VerifyOutcome::Cex(Counterexample::Init { x }));
        }
        MilpVerdict::Infeasible => {}
        MilpVerdict::TimedOut(_) | MilpVerdict::Unbounded => return Ok(VerifyOutcome::Timeout),
    }

    // Check 3: negativity on the unsafe set, one disjunct at a time; the
    // lowest-index feasible disjunct wins.
    for disjunct in &env.unsafe_set().disjuncts {
        let check = build_check3(g, disjunct, env.state_box())?;
        match solve_check(&check, deadline, worst_counterexample)? {
            MilpVerdict::Optimal(sol) => {
                validate_witness(&check, &sol, "unsafe-set")?;
                let x = values_of(&sol, &check.x);
                let gx = g.forward(&x)?[0];
                if gx < -REPLAY_TOL {
                    return Err(CegisError::WitnessReplay {
                        check: "unsafe-set-score",
                        residual: gx,
                    });
                }
                return Ok(VerifyOutcome::Cex(Counterexample::Unsafe { x }));
            }
            MilpVerdict::Infeasible => {}
            MilpVerdict::TimedOut(_) | MilpVerdict::Unbounded => {
                return Ok(VerifyOutcome::Timeout)
            }
        }
    }
    Ok(VerifyOutcome::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::DELTA_STRICT;
    use crate::env::Affine1d;
    use crate::fixtures::{hand_invariant_1d, toy_policy_1d};
    use crate::nn::{DenseMatrix, Layer};
    use std::time::Duration;

    fn far_deadline() -> Instant {
        Instant::now() + Duration::from_secs(60)
    }

    fn constant_g(c: f64) -> MlpNetwork {
        MlpNetwork::new(vec![Layer::new(DenseMatrix::zeros(1, 1), vec![c]).unwrap()]).unwrap()
    }

    #[test]
    fn constant_negative_yields_init_counterexample() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let out = verify_candidate(
            &constant_g(-1.0),
            &env,
            &policy,
            0.5,
            DELTA_STRICT,
            far_deadline(),
            true,
        )
        .unwrap();
        match out {
            VerifyOutcome::Cex(Counterexample::Init { x }) => {
                assert!(env.initial_set().contains(&x));
            }
            other => panic!("expected init counterexample, got {other:?}"),
        }
    }

    #[test]
    fn constant_positive_yields_unsafe_counterexample() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let out = verify_candidate(
            &constant_g(1.0),
            &env,
            &policy,
            0.5,
            DELTA_STRICT,
            far_deadline(),
            true,
        )
        .unwrap();
        match out {
            VerifyOutcome::Cex(Counterexample::Unsafe { x }) => {
                assert!(env.is_unsafe(&x), "witness {x:?}");
            }
            other => panic!("expected unsafe counterexample, got {other:?}"),
        }
    }

    #[test]
    fn drifting_system_yields_transition_counterexample() {
        let env = Affine1d::shift_down();
        let policy = toy_policy_1d();
        let g = MlpNetwork::new(vec![Layer::new(
            DenseMatrix::new(1, 1, vec![1.0]).unwrap(),
            vec![0.0],
        )
        .unwrap()])
        .unwrap(); // g(x) = x
        let out =
            verify_candidate(&g, &env, &policy, 0.5, DELTA_STRICT, far_deadline(), true).unwrap();
        match out {
            VerifyOutcome::Cex(Counterexample::Transition { x, xp }) => {
                assert!(g.forward(&x).unwrap()[0] >= -1e-9);
                assert!(g.forward(&xp).unwrap()[0] <= -DELTA_STRICT + 1e-9);
                assert!((xp[0] - (x[0] - 1.0)).abs() < 1e-5);
            }
            other => panic!("expected transition counterexample, got {other:?}"),
        }
    }

    #[test]
    fn hand_invariant_passes_all_checks() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let g = hand_invariant_1d(0.95);
        let out =
            verify_candidate(&g, &env, &policy, 2.0, DELTA_STRICT, far_deadline(), true).unwrap();
        assert!(matches!(out, VerifyOutcome::Pass), "{out:?}");
    }

    #[test]
    fn exhausted_deadline_reports_timeout() {
        let env = Affine1d::stable();
        let policy = toy_policy_1d();
        let g = hand_invariant_1d(0.95);
        let out = verify_candidate(
            &g,
            &env,
            &policy,
            2.0,
            DELTA_STRICT,
            Instant::now() - Duration::from_secs(1),
            true,
        )
        .unwrap();
        assert!(matches!(out, VerifyOutcome::Timeout), "{out:?}");
    }
}
