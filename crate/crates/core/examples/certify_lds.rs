//! Quick certification smoke run on the linear system fixture.

use bnncert::cegis::{run_cegis, CegisConfig, CegisMode};
use bnncert::env::Lds;
use bnncert::fixtures;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

fn main() {
    env_logger::init();
    let env = Lds::new();
    let policy = fixtures::lds_stabilizing_policy();
    let eps: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.5);
    let cfg = CegisConfig {
        mode: CegisMode::Bootstrap,
        timeout: Duration::from_secs(900),
        ..CegisConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t0 = Instant::now();
    let outcome = run_cegis(&env, &policy, eps, &cfg, &mut rng).unwrap();
    let dt = t0.elapsed();
    match &outcome {
        bnncert::cegis::CegisOutcome::Safe { stats, .. } => {
            println!(
                "SAFE eps={eps} in {:.1?}: {} iterations, {} counterexamples, solver {} ms",
                dt, stats.iterations, stats.counterexamples, stats.solver_ms
            );
            for r in &stats.records {
                println!(
                    "  iter {:>3} check={:?} |spec|={} |ce|={} loss={:.4} solver={}ms",
                    r.iter, r.check_fired, r.d_spec, r.d_ce, r.loss, r.solver_ms
                );
            }
        }
        bnncert::cegis::CegisOutcome::Unsafe { reason, stats } => {
            println!(
                "NOT CERTIFIED eps={eps} in {:.1?}: reason {:?}, {} iterations",
                dt, reason, stats.iterations
            );
            for r in &stats.records {
                println!(
                    "  iter {:>3} check={:?} |spec|={} |ce|={} loss={:.4} solver={}ms",
                    r.iter, r.check_fired, r.d_spec, r.d_ce, r.loss, r.solver_ms
                );
            }
        }
    }
}
