//! Timing probe for the closedness check on the LDS fixture.

use bnncert::cegis::{init_datasets, train_candidate, CeDataset, CegisConfig, CegisMode};
use bnncert::encode::{build_check1, DELTA_STRICT};
use bnncert::env::Lds;
use bnncert::fixtures;
use bnncert::milp::{MilpVerdict, VarKind};
use bnncert::nn::MlpNetwork;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

fn main() {
    let env = Lds::new();
    let policy = fixtures::lds_stabilizing_policy();
    let eps = 0.5;
    let cfg = CegisConfig {
        mode: CegisMode::Bootstrap,
        ..CegisConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t0 = Instant::now();
    let spec = init_datasets(&env, &policy, eps, &cfg, &mut rng).unwrap();
    println!("init_datasets: {:?} ({} points)", t0.elapsed(), spec.len());

    let g0 = MlpNetwork::random(&[2, cfg.invariant_hidden, 1], rng.gen()).unwrap();
    let t0 = Instant::now();
    let (g, loss) = train_candidate(&g0, &spec, &CeDataset::default(), &cfg, &cfg.pretrain).unwrap();
    println!("pretrain: {:?} (loss {loss:.4})", t0.elapsed());
    let pmax = g.params_flat().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    println!("g max |param| = {pmax:.3}");

    let t0 = Instant::now();
    let check = build_check1(&g, &policy, eps, &env, DELTA_STRICT).unwrap();
    println!(
        "build_check1 (with OBBT): {:?}; vars={} constraints={} binaries={}",
        t0.elapsed(),
        check.problem.var_count(),
        check.problem.constraint_count(),
        check
            .problem
            .variables()
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    );

    let t0 = Instant::now();
    let verdict = check.problem.solve(Duration::from_secs(120));
    println!("solve: {:?} -> {:?}", t0.elapsed(), verdict.map(|v| match v {
        MilpVerdict::Optimal(s) => format!("Optimal obj {}", s.objective),
        MilpVerdict::Infeasible => "Infeasible".into(),
        MilpVerdict::Unbounded => "Unbounded".into(),
        MilpVerdict::TimedOut(_) => "TimedOut".into(),
    }));
}
